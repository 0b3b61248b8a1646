"""Hand-built fixtures shared by the tests (independent of scenario files)."""
from fractions import Fraction
from pathlib import Path

from dltts.model import (
    AttributeGroup,
    Database,
    Header,
    HeaderClass,
    IntInterval,
    NominalSet,
    PolicyAtom,
    Record,
    Schema,
    TaxNode,
    Wildcard,
)
from dltts import saturation as sat
from dltts.system import Branch, Dltts, ScriptStep
from dltts.taxonomy import Taxonomy

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

NOM, NUMV, NUMC, TAX = HeaderClass.NOMINAL, HeaderClass.NUMERVAL, HeaderClass.NUMERICAL, HeaderClass.TAXORAL
SENS, IDENT = AttributeGroup.SENSITIVE, AttributeGroup.IDENTIFIER

AILMENT = Taxonomy.from_nested(
    "Ailment",
    {"Ailment": {"Heart-Disease": {}, "Cancer": {}, "Viral-Infection": {"Flu": {}, "CoVid": {}}}},
)

H_NAME = Header("Name", NOM, IDENT)
H_AGE = Header("Age", NUMV)
H_GENDER = Header("Gender", NOM)
H_DEPT = Header("Dept", NOM)
H_AIL = Header("Ailment", TAX, SENS, AILMENT)

PUBLISHED = Schema("published", (H_AGE, H_GENDER, H_DEPT, H_AIL))
HOSPITAL = Schema("hospital", (H_NAME, H_AGE, H_GENDER, H_DEPT, H_AIL))
ACQUAINTANCE = Schema("acquaintance", (H_NAME, H_AGE, H_GENDER))
NOTICE = Schema("physics_notice", (H_DEPT, H_GENDER, H_AIL, Header("Count", NUMV)))


def ail(label):
    return TaxNode(AILMENT, label)


def half_open(lo, hi):
    return IntInterval(lo, hi, hi_closed=False)


def pub(age, gender, dept, ailment, schema=PUBLISHED):
    return Record(schema, (age, NominalSet.of(gender), NominalSet.of(dept), ail(ailment)))


L1 = pub(half_open(20, 30), "F", "Chemistry", "Heart-Disease")
L2 = pub(half_open(40, 50), "M", "Chemistry", "Cancer")
L3 = pub(half_open(20, 30), "F", "Physics", "Viral-Infection")
L4 = pub(half_open(50, 60), "M", "Maths", "Viral-Infection")
L5 = pub(half_open(40, 50), "M", "Physics", "Viral-Infection")
L5_CLOSED = pub(IntInterval(40, 50), "M", "Physics", "Viral-Infection")
TARGET = Record(PUBLISHED.renamed("target"), (IntInterval.point(46), NominalSet.of("M"), Wildcard(), ail("CoVid")))

JOHN_PATTERN = Record(
    HOSPITAL,
    (NominalSet.of("John"), IntInterval.point(46), NominalSet.of("M"), Wildcard(), ail("CoVid")),
)
POLICY = (PolicyAtom(JOHN_PATTERN),)

ACQ = Database(ACQUAINTANCE, (Record(ACQUAINTANCE, (NominalSet.of("John"), IntInterval.point(46), NominalSet.of("M"))),))


def notice_db(male_cases=1):
    rows = (
        Record(NOTICE, (NominalSet.of("Physics"), NominalSet.of("F"), ail("CoVid"), IntInterval.point(0))),
        Record(NOTICE, (NominalSet.of("Physics"), NominalSet.of("M"), ail("CoVid"), IntInterval.point(male_cases))),
    )
    return Database(NOTICE, rows)


HOSPITAL_RULES = (
    sat.Select("physics_notice", "positive_notice", where={"Count": IntInterval(1, 10**6)}),
    sat.Join("published", "positive_notice", "covid_case"),
    sat.Join("covid_case", "acquaintance", "john_case"),
    sat.Project("john_case", "john_record", ("Name", "Age", "Gender", "Dept", "Ailment")),
)

MEN_STEP = ScriptStep(
    "men",
    (Branch((L2,), Fraction(0), "l2"), Branch((L4,), Fraction(1, 3), "l4"), Branch((L5,), Fraction(2, 3), "l5")),
)


def hospital_engine(male_cases=1, externals=None):
    exts = {"acquaintance": ACQ, "physics_notice": notice_db(male_cases)} if externals is None else externals
    return Dltts(externals=exts, rules=HOSPITAL_RULES, policy=POLICY, target=(TARGET,))
