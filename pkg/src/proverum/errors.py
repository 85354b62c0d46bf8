"""Exception hierarchy shared by all modules."""


class ProverumError(Exception):
    """Base class for every domain error raised by the simulator."""


class DecodeError(ProverumError):
    pass


# pki
class DuplicateAuthority(ProverumError):
    pass


class InvalidParent(ProverumError):
    pass


class UnknownIssuer(ProverumError):
    pass


class UnknownAuthority(ProverumError):
    pass


# ledger
class IncompatibleChaincode(ProverumError):
    pass


class UnknownMember(ProverumError):
    pass


class NotAMember(ProverumError):
    pass


class WrongOrderer(ProverumError):
    pass


class EmptyPool(ProverumError):
    pass


# privdata
class NotAuthorized(ProverumError):
    pass


class NoOnChainDigest(ProverumError):
    pass


class UnknownKey(ProverumError):
    pass


# citizen registry
class NotOwner(ProverumError):
    pass


class DuplicateId(ProverumError):
    pass


class UnknownId(ProverumError):
    pass


class SameMunicipality(ProverumError):
    pass


class InvalidRecord(ProverumError):
    pass


# electoral register / artifacts
class NotInRegister(ProverumError):
    pass


class UnknownCommitment(ProverumError):
    pass


class RegisterDigestMismatch(ProverumError):
    pass


# results
class WrongScope(ProverumError):
    pass


class UnsignedResult(ProverumError):
    pass


class MissingChildResult(ProverumError):
    pass


class ChildFailedPlausibility(ProverumError):
    pass


class PrematureDestruction(ProverumError):
    pass


# public environment
class GatekeeperRejection(ProverumError):
    pass


class BadSourceSignature(ProverumError):
    pass


class UnauthorizedProducer(ProverumError):
    pass


# scenario
class UnsupportedContext(ProverumError):
    pass


class ParseError(ProverumError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class StepPreconditionFailed(ProverumError):
    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step
