"""Citizen seed data: a CSV table and a seeded generator."""

from __future__ import annotations

import csv
import datetime as dt
import io
import random
from typing import Iterable, Sequence

from ..citizen_registry import CitizenRecord, ResidenceType
from ..errors import ParseError

COLUMNS = ("local_person_id", "official_name", "first_name", "date_of_birth", "nationality",
           "residence_municipality", "residence_type", "voting_restriction")

# at least five letters each, and none is an authority label
FAMILY_NAMES = ("Ammann", "Baumann", "Brunner", "Gerber", "Huber", "Keller", "Kuster",
                "Lehmann", "Meier", "Moser", "Muller", "Schmid", "Schneider", "Steiner", "Weber",
                "Widmer", "Zimmermann", "Zollinger", "Baertschi", "Fankhauser", "Hofstetter")
GIVEN_NAMES = ("Adrian", "Andrea", "Barbara", "Beatrice", "Christian", "Claudia", "Daniel", "Doris",
               "Elisabeth", "Fabian", "Franziska", "Gabriel", "Heinrich", "Isabelle", "Jakob", "Karin",
               "Lukas", "Martina", "Nicole", "Patrick", "Regula", "Samuel", "Simone", "Stefan", "Ursula",
               "Valentin", "Verena", "Yvonne")
FOREIGN = ("DE", "IT", "FR", "PT", "AT")


def parse_citizens(text: str) -> list[CitizenRecord]:
    reader = csv.reader(io.StringIO(text))
    records = []
    header_seen = False
    for row in reader:
        line = reader.line_num
        if not row or row[0].startswith("#"):
            continue
        if not header_seen:
            if tuple(c.strip() for c in row) != COLUMNS:
                raise ParseError(f"expected header {','.join(COLUMNS)}", line)
            header_seen = True
            continue
        if len(row) != len(COLUMNS):
            raise ParseError(f"expected {len(COLUMNS)} columns, got {len(row)}", line)
        values = [c.strip() for c in row]
        try:
            dob = dt.date.fromisoformat(values[3])
        except ValueError:
            raise ParseError(f"bad date {values[3]!r}", line, _column(row, 3)) from None
        try:
            rtype = ResidenceType(values[6])
        except ValueError:
            raise ParseError(f"bad residence type {values[6]!r}", line, _column(row, 6)) from None
        if values[7] not in ("true", "false"):
            raise ParseError("voting_restriction must be true or false", line, _column(row, 7))
        records.append(CitizenRecord(values[0], values[1], values[2], dob, values[4], values[5], rtype,
                                     values[7] == "true"))
    if not header_seen:
        raise ParseError("missing header", 1)
    return records


def _column(row: Sequence[str], index: int) -> int:
    return sum(len(c) + 1 for c in row[:index]) + 1


def format_citizens(records: Iterable[CitizenRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in records:
        writer.writerow([r.local_person_id, r.official_name, r.first_name, r.date_of_birth.isoformat(),
                         r.nationality, r.residence_municipality, r.residence_type.value,
                         "true" if r.voting_restriction else "false"])
    return out.getvalue()


def generate_citizens(rng: random.Random, municipalities: Sequence[str], per_municipality: int,
                      today: dt.date) -> list[CitizenRecord]:
    """A plausible mixed population: mostly Swiss adults, some minors, foreigners and secondary residents."""
    records = []
    used: set[tuple[str, str, dt.date]] = set()
    for municipality in municipalities:
        for i in range(1, per_municipality + 1):
            while True:
                family, given = rng.choice(FAMILY_NAMES), rng.choice(GIVEN_NAMES)
                age_days = rng.randint(10 * 365, 90 * 365)
                dob = today - dt.timedelta(days=age_days)
                if (family, given, dob) not in used:
                    used.add((family, given, dob))
                    break
            roll = rng.random()
            nationality = rng.choice(FOREIGN) if roll < 0.1 else "CH"
            rtype = ResidenceType.SECONDARY if rng.random() < 0.05 else ResidenceType.MAIN
            restricted = rng.random() < 0.02
            records.append(CitizenRecord(f"{municipality}-{i:04d}", family, given, dob, nationality,
                                         municipality, rtype, restricted))
    return records
