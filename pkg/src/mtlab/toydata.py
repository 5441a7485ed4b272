"""Synthetic Polish-English medicine-leaflet corpus bundled with the package.

The sentences are produced from a handful of templates, so the corpus is
small, clean and fully parallel while still containing local reordering
(postposed Polish adjectives, genitive constructions) for the phrase-based
system to learn. ``python -m mtlab.toydata`` regenerates the bundled files.
"""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

DATA_DIR = Path(__file__).with_name("data")
SOURCE_FILE = "toy.pl.txt"
TARGET_FILE = "toy.en.txt"

FORMS = [  # nominative, genitive, English
    ("tabletki powlekane", "tabletek powlekanych", "the coated tablets"),
    ("kapsułki twarde", "kapsułek twardych", "the hard capsules"),
    ("roztwór doustny", "roztworu doustnego", "the oral solution"),
    ("ten lek", "tego leku", "this medicine"),
    ("maść", "maści", "the ointment"),
    ("syrop dla dzieci", "syropu dla dzieci", "the syrup for children"),
    ("krople do oczu", "kropli do oczu", "the eye drops"),
    ("zawiesina doustna", "zawiesiny doustnej", "the oral suspension"),
]
FREQUENCIES = [
    ("raz na dobę", "once a day"), ("dwa razy na dobę", "twice a day"),
    ("co osiem godzin", "every eight hours"), ("przed posiłkiem", "before a meal"),
    ("po posiłku", "after a meal"), ("wieczorem", "in the evening"),
    ("rano", "in the morning"), ("trzy razy na dobę", "three times a day"),
]
SYMPTOMS = [
    ("ból głowy", "headache"), ("nudności", "nausea"), ("zawroty głowy", "dizziness"),
    ("wysypka skórna", "skin rash"), ("senność", "drowsiness"), ("biegunka", "diarrhoea"),
    ("gorączka", "fever"), ("ból brzucha", "stomach pain"), ("suchość w ustach", "dry mouth"),
]
GROUPS = [
    ("pacjentów w podeszłym wieku", "elderly patients"), ("dzieci", "children"),
    ("kobiet w ciąży", "pregnant women"), ("niektórych pacjentów", "some patients"),
    ("pacjentów z cukrzycą", "patients with diabetes"),
    ("dorosłych", "adults"),
]
ADVERBS = [("", ""), ("rzadko ", "rarely "), ("bardzo rzadko ", "very rarely "),
           ("często ", "often ")]
PEOPLE = [("lekarzem", "your doctor"), ("farmaceutą", "your pharmacist"),
          ("pielęgniarką", "your nurse")]
SUBSTANCES = [("paracetamolu", "paracetamol"), ("ibuprofenu", "ibuprofen"),
              ("metforminy", "metformin"), ("amoksycyliny", "amoxicillin"),
              ("diklofenaku", "diclofenac")]
DOSES = ["5", "10", "20", "50", "100", "250", "500"]
PLACES = [("lodówce", "a refrigerator"), ("oryginalnym opakowaniu", "the original package"),
          ("temperaturze pokojowej", "room temperature"), ("suchym miejscu", "a dry place"),
          ("miejscu niedostępnym dla dzieci", "a place out of reach of children")]
DISEASES = [("nadciśnienia tętniczego", "high blood pressure"),
            ("cukrzycy typu 2", "type 2 diabetes"),
            ("zakażeń bakteryjnych", "bacterial infections"),
            ("bólu i gorączki", "pain and fever"), ("astmy", "asthma"),
            ("migreny", "migraine")]


def _sentence(rng: random.Random) -> tuple[str, str]:
    kind = rng.randrange(8)
    nom, gen, en = rng.choice(FORMS)
    if kind == 0:
        pl, e = rng.choice(FREQUENCIES)
        if rng.random() < 0.5:
            return f"{nom} należy przyjmować {pl}.", f"{en} should be taken {e}."
        dose = rng.choice(DOSES)
        return (f"{nom} należy przyjmować w dawce {dose} mg {pl}.",
                f"{en} should be taken at a dose of {dose} mg {e}.")
    if kind == 1:
        (sp, se), (gp, ge) = rng.choice(SYMPTOMS), rng.choice(GROUPS)
        (ap, ae) = rng.choice(ADVERBS)
        return f"{sp} może {ap}wystąpić u {gp}.", f"{se} may {ae}occur in {ge}."
    if kind == 2:
        (sp, se), (pp, pe) = rng.choice(SYMPTOMS), rng.choice(PEOPLE)
        return (f"jeśli wystąpi {sp}, należy skontaktować się z {pp}.",
                f"if {se} occurs, contact {pe}.")
    if kind == 3:
        gp, ge = rng.choice(GROUPS)
        return f"nie należy stosować {gen} u {gp}.", f"do not use {en} in {ge}."
    if kind == 4:
        (sp, se), dose = rng.choice(SUBSTANCES), rng.choice(DOSES)
        return f"{nom} zawiera {dose} mg {sp}.", f"{en} contains {dose} mg of {se}."
    if kind == 5:
        pp, pe = rng.choice(PLACES)
        return f"{nom} należy przechowywać w {pp}.", f"store {en} in {pe}."
    if kind == 6:
        dp, de = rng.choice(DISEASES)
        return f"{nom} stosuje się w leczeniu {dp}.", f"{en} is used to treat {de}."
    pp, pe = rng.choice(PEOPLE)
    return (f"przed zastosowaniem {gen} należy porozmawiać z {pp}.",
            f"talk to {pe} before using {en}.")


def generate(n: int = 2000, seed: int = 2016) -> list[tuple[str, str]]:
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        pl, en = _sentence(rng)
        out.append((pl[0].upper() + pl[1:], en[0].upper() + en[1:]))
    return out


def toy_paths() -> tuple[Path, Path]:
    """Paths of the bundled (Polish, English) files."""
    base = resources.files("mtlab") / "data"
    return Path(str(base / SOURCE_FILE)), Path(str(base / TARGET_FILE))


def write(directory: Path = DATA_DIR, n: int = 2000, seed: int = 2016) -> None:
    pairs = generate(n, seed)
    with open(directory / SOURCE_FILE, "w", encoding="utf-8", newline="\n") as fs, \
            open(directory / TARGET_FILE, "w", encoding="utf-8", newline="\n") as ft:
        for pl, en in pairs:
            fs.write(pl + "\n")
            ft.write(en + "\n")


if __name__ == "__main__":
    write()
