"""Tag schema, CoNLL I/O, IOB validation, dataset splitting, synthetic data.

The corpus the numbers were measured on is proprietary, so this module ships
a deterministic generator that produces templated Turkish address queries
over built-in gazetteers with a comparable label imbalance (POI most
frequent, DOOR least).
"""

import random
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import (
    EmptySample,
    InvalidSize,
    ParseError,
    SchemaError,
    TooLong,
    TooSmall,
    UnknownTag,
)
from .turkish_text import turkish_lowercase

MAX_SAMPLE_LEN = 256

OUTSIDE = "O"

# Entity inventory. The multi-token subset gets an I- tag; the rest are
# single-token-only, which makes the IOB inventory 1 + 14 + 10 = 25 tags.
DEFAULT_ENTITY_TYPES = (
    "COUNTRY",
    "CITY",
    "DISTRICT",
    "NEIGHBORHOOD",
    "VILLAGE",
    "STREET",
    "AVENUE",
    "BUILDING",
    "SITE",
    "BLOCK",
    "FLOOR",
    "DOOR",
    "POSTCODE",
    "POI",
)
DEFAULT_SINGLE_TOKEN = ("BLOCK", "FLOOR", "DOOR", "POSTCODE")


@dataclass(frozen=True)
class TagSchema:
    """Entity-type inventory and its IOB expansion."""

    entity_types: Tuple[str, ...]
    multi_token: frozenset

    def __post_init__(self):
        seen = set()
        for name in self.entity_types:
            if not name or name != name.upper() or not name.isascii():
                raise ValueError(f"entity type {name!r} must be an uppercase ASCII identifier")
            if name in seen:
                raise ValueError(f"duplicate entity type {name!r}")
            seen.add(name)
        unknown = self.multi_token - seen
        if unknown:
            raise ValueError(f"multi_token names not in inventory: {sorted(unknown)}")

    @property
    def tags(self) -> Tuple[str, ...]:
        """Ordered IOB tag inventory: O first, then B-X (and I-X if allowed)."""
        out = [OUTSIDE]
        for name in self.entity_types:
            out.append(f"B-{name}")
            if name in self.multi_token:
                out.append(f"I-{name}")
        return tuple(out)

    @property
    def tag_index(self) -> Dict[str, int]:
        return {t: i for i, t in enumerate(self.tags)}

    def entity_of(self, tag: str) -> Optional[str]:
        """Entity type of an IOB tag, or None for O."""
        if tag == OUTSIDE:
            return None
        return tag[2:]


def default_schema() -> TagSchema:
    """The 14-entity default schema whose IOB expansion has 25 tags."""
    return TagSchema(
        entity_types=DEFAULT_ENTITY_TYPES,
        multi_token=frozenset(DEFAULT_ENTITY_TYPES) - frozenset(DEFAULT_SINGLE_TOKEN),
    )


def load_schema(text: str) -> TagSchema:
    """Parse the schema file format: one entity type per line, '*' suffix
    marking single-token-only types. Blank lines and '#' comments ignored."""
    types: List[str] = []
    single: List[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.endswith("*"):
            name = line[:-1].strip()
            single.append(name)
        else:
            name = line
        types.append(name)
    return TagSchema(entity_types=tuple(types), multi_token=frozenset(types) - frozenset(single))


def dump_schema(schema: TagSchema) -> str:
    lines = []
    for name in schema.entity_types:
        suffix = "" if name in schema.multi_token else "*"
        lines.append(name + suffix)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AddressSample:
    """One address query: tokens and their aligned IOB tags."""

    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tokens) != len(self.tags):
            raise ValueError(f"{len(self.tokens)} tokens vs {len(self.tags)} tags")
        if not self.tokens:
            raise EmptySample("a sample needs at least one token")
        if len(self.tokens) > MAX_SAMPLE_LEN:
            raise TooLong(f"sample length {len(self.tokens)} exceeds {MAX_SAMPLE_LEN}")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class IobViolation:
    index: int
    message: str


def validate_iob(tags: Sequence[str], schema: TagSchema) -> Optional[IobViolation]:
    """Check IOB2 validity: every I-X immediately follows B-X or I-X.

    Returns None when valid, otherwise the first violation. Tags outside the
    schema inventory raise :class:`UnknownTag`.
    """
    inventory = set(schema.tags)
    for i, tag in enumerate(tags):
        if tag not in inventory:
            raise UnknownTag(f"tag {tag!r} not in schema inventory")
        if tag.startswith("I-"):
            wanted = tag[2:]
            prev = tags[i - 1] if i > 0 else None
            if prev not in (f"B-{wanted}", f"I-{wanted}"):
                return IobViolation(i, f"{tag} at {i} not preceded by B-{wanted} or I-{wanted}")
    return None


def parse_conll(data: Union[str, bytes], schema: Optional[TagSchema] = None,
                normalize: bool = True) -> List[AddressSample]:
    """Parse CoNLL text: one "token<ws>tag" per line, blank line ends a sample.

    Tokens are normalized with :func:`turkish_lowercase` unless ``normalize``
    is False. Samples are IOB-validated against ``schema`` when one is given.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    samples: List[AddressSample] = []
    tokens: List[str] = []
    tags: List[str] = []

    def flush():
        if not tokens:
            return
        if schema is not None:
            bad = validate_iob(tags, schema)
            if bad is not None:
                raise SchemaError(len(samples), bad.message)
        samples.append(AddressSample(tuple(tokens), tuple(tags)))
        tokens.clear()
        tags.clear()

    for line_no, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            flush()
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(line_no, f"expected 'token tag', got {raw!r}")
        token, tag = fields
        tokens.append(turkish_lowercase(token) if normalize else token)
        tags.append(tag)
    flush()
    return samples


def write_conll(samples: Sequence[AddressSample]) -> str:
    """Canonical CoNLL serialization: TAB separator, blank line per sample."""
    chunks = []
    for s in samples:
        for token, tag in zip(s.tokens, s.tags):
            chunks.append(f"{token}\t{tag}\n")
        chunks.append("\n")
    return "".join(chunks)


@dataclass
class DatasetSplits:
    train: List[AddressSample]
    validation: List[AddressSample]
    test: List[AddressSample]


def split_sizes(n: int) -> Tuple[int, int, int]:
    """70/15/15 arithmetic: round-half-up train, validation takes odd extras."""
    n_train = (7 * n + 5) // 10
    rest = n - n_train
    n_test = rest // 2
    n_val = rest - n_test
    return n_train, n_val, n_test


def split_dataset(samples: Sequence[AddressSample], seed: int) -> DatasetSplits:
    """Deterministic shuffle then 70/15/15 partition."""
    n = len(samples)
    if n < 10:
        raise TooSmall(f"need at least 10 samples to split, got {n}")
    order = list(samples)
    random.Random(seed).shuffle(order)
    n_train, n_val, n_test = split_sizes(n)
    return DatasetSplits(
        train=order[:n_train],
        validation=order[n_train:n_train + n_val],
        test=order[n_train + n_val:],
    )


def label_histogram(samples: Sequence[AddressSample]) -> Dict[str, int]:
    """Tag counts over all token positions."""
    counts: Counter = Counter()
    for s in samples:
        counts.update(s.tags)
    return dict(counts)


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

_CITIES = [
    "istanbul", "ankara", "izmir", "bursa", "adana", "konya", "antalya",
    "mersin", "kayseri", "eskişehir", "samsun", "denizli", "şanlıurfa",
    "malatya", "gaziantep", "trabzon", "erzurum", "van", "sivas", "ısparta",
    "muğla", "aydın", "tekirdağ", "çanakkale", "edirne", "rize", "ordu",
    "giresun", "bolu", "düzce", "sakarya", "kocaeli", "manisa", "hatay",
    "elazığ", "tokat", "çorum", "amasya", "niğde", "karabük",
]

_DISTRICTS = [
    "kadıköy", "beşiktaş", "üsküdar", "şişli", "bakırköy", "maltepe",
    "pendik", "kartal", "ataşehir", "beylikdüzü", "sarıyer", "fatih",
    "beyoğlu", "çankaya", "keçiören", "mamak", "yenimahalle", "karşıyaka",
    "bornova", "konak", "buca", "nilüfer", "osmangazi", "yıldırım",
    "selçuklu", "meram", "muratpaşa", "kepez", "seyhan", "çukurova",
    "ilkadım", "atakum", "pamukkale", "odunpazarı", "tepebaşı", "melikgazi",
    "kocasinan", "haliliye", "battalgazi", "şehitkamil",
]

_NEIGHBORHOOD_NAMES = [
    "cumhuriyet", "atatürk", "yıldız", "çamlık", "yeşiltepe", "gültepe",
    "esentepe", "kocatepe", "bahçelievler", "yenişehir", "güzelyalı",
    "göztepe", "erenköy", "suadiye", "fenerbahçe", "bostancı", "kozyatağı",
    "barbaros", "pınarbaşı", "karadeniz", "mimar sinan", "mehmet akif",
    "fevzi çakmak", "namık kemal", "yavuz selim", "şirinevler", "gazipaşa",
    "huzur", "emek", "zafer",
]
_NEIGHBORHOOD_MARKERS = ["mahallesi", "mah"]

_STREET_NAMES = [
    "gül", "papatya", "menekşe", "lale", "zambak", "karanfil", "orkide",
    "manolya", "leylak", "sümbül", "fulya", "mimoza", "begonya", "akasya",
    "ıhlamur", "çınar", "kavak", "söğüt", "selvi", "palmiye", "nergis",
    "yasemin", "kardelen", "safran",
]
_STREET_MARKERS = ["sokak", "sk", "sokağı"]

_AVENUE_NAMES = [
    "atatürk", "istiklal", "cumhuriyet", "bağdat", "inönü", "gazi",
    "hürriyet", "vatan", "millet", "barış", "zafer", "istasyon", "sahil",
    "liman", "okul", "çarşı",
]
_AVENUE_MARKERS = ["caddesi", "cad"]

_VILLAGE_NAMES = [
    "taşlıca", "kayalar", "çamlıca", "gökçe", "sarıkaya", "akpınar",
    "karacaören", "yeniçiftlik", "doğanlı", "güzelce", "ballıca", "kuşça",
]
_VILLAGE_MARKER = "köyü"

_BUILDING_NAMES = [
    "yasemin", "defne", "zeytin", "palmiye", "güneş", "yıldız", "doruk",
    "pınar", "umut", "deniz", "mercan", "inci",
]
_BUILDING_MARKERS = ["apartmanı", "apt"]

_SITE_NAMES = [
    "park", "marina", "vadi", "koru", "bahçe", "göl", "orman", "panorama",
    "teras", "seyir", "manzara", "yaşam",
]
_SITE_MARKER = "sitesi"

_POIS = [
    ["nike", "store"], ["starbucks"], ["migros"], ["bim"], ["a101"],
    ["şok", "market"], ["carrefoursa"], ["teknosa"], ["mado"],
    ["simit", "sarayı"], ["kahve", "dünyası"], ["burger", "king"],
    ["ayasofya", "camii"], ["galata", "kulesi"], ["kız", "kulesi"],
    ["dolmabahçe", "sarayı"], ["topkapı", "sarayı"], ["taksim", "meydanı"],
    ["kapalı", "çarşı"], ["mısır", "çarşısı"], ["anıtkabir"],
    ["boğaziçi", "üniversitesi"], ["şehir", "hastanesi"],
    ["devlet", "hastanesi"], ["atatürk", "havalimanı"],
    ["sabiha", "gökçen", "havalimanı"], ["forum", "istanbul", "avm"],
    ["cevahir", "avm"], ["kanyon", "avm"], ["zorlu", "center"],
    ["akasya", "avm"], ["optimum", "outlet"], ["eczane"], ["postane"],
    ["ziraat", "bankası"], ["iş", "bankası"], ["garanti", "bankası"],
    ["öğretmen", "evi"], ["halk", "kütüphanesi"], ["merkez", "camii"],
    ["ulu", "camii"], ["gençlik", "merkezi"], ["kültür", "merkezi"],
    ["sanat", "galerisi"], ["arkeoloji", "müzesi"], ["etnografya", "müzesi"],
    ["olimpiyat", "stadı"], ["şükrü", "saracoğlu", "stadyumu"],
]

_COUNTRIES = ["türkiye", "kktc"]

_BLOCKS = ["a", "b", "c", "d", "e", "a1", "a2", "b1", "b2", "c1", "c3", "d4"]

_POSTCODES = [str(34000 + 10 * k + 700) for k in range(16)] + \
             [str(6000 + 20 * k + 100).zfill(5) for k in range(16)] + \
             [str(35000 + 20 * k + 220) for k in range(16)]

_FILLERS = ["yanı", "karşısı", "girişi", "arkası", "yakını"]

# Per-sample inclusion probabilities; chosen so the marginal type frequencies
# put POI on top and DOOR at the bottom with a wide margin.
_P_POI = 0.93
_P_CITY = 0.72
_P_DISTRICT = 0.60
_P_NEIGHBORHOOD = 0.52
_P_STREET = 0.45
_P_AVENUE = 0.28
_P_BUILDING = 0.16
_P_SITE = 0.14
_P_VILLAGE = 0.10
_P_COUNTRY = 0.09
_P_BLOCK = 0.10
_P_FLOOR = 0.09
_P_POSTCODE = 0.12
_P_DOOR = 0.045
_P_FILLER = 0.25


def _entity(tokens: List[str], kind: str) -> Tuple[List[str], List[str]]:
    tags = [f"B-{kind}"] + [f"I-{kind}"] * (len(tokens) - 1)
    return tokens, tags


def _named_entity(rng: random.Random, names, markers, kind: str):
    parts = rng.choice(names).split()
    parts.append(rng.choice(markers))
    return _entity(parts, kind)


def generate_sample(rng: random.Random, schema: TagSchema) -> AddressSample:
    """One templated address query; IOB-valid by construction."""
    tokens: List[str] = []
    tags: List[str] = []

    def put(toks, tgs):
        tokens.extend(toks)
        tags.extend(tgs)

    if rng.random() < _P_POI:
        put(*_entity(list(rng.choice(_POIS)), "POI"))
        if rng.random() < _P_FILLER:
            put([rng.choice(_FILLERS)], [OUTSIDE])
    if rng.random() < _P_NEIGHBORHOOD:
        put(*_named_entity(rng, _NEIGHBORHOOD_NAMES, _NEIGHBORHOOD_MARKERS, "NEIGHBORHOOD"))
    if rng.random() < _P_STREET:
        put(*_named_entity(rng, _STREET_NAMES, _STREET_MARKERS, "STREET"))
    if rng.random() < _P_AVENUE:
        put(*_named_entity(rng, _AVENUE_NAMES, _AVENUE_MARKERS, "AVENUE"))
    if rng.random() < _P_SITE:
        put(*_named_entity(rng, _SITE_NAMES, [_SITE_MARKER], "SITE"))
    if rng.random() < _P_BUILDING:
        put(*_named_entity(rng, _BUILDING_NAMES, _BUILDING_MARKERS, "BUILDING"))
    if rng.random() < _P_BLOCK:
        put([rng.choice(_BLOCKS)], ["B-BLOCK"])
        put(["blok"], [OUTSIDE])
    if rng.random() < _P_FLOOR:
        put(["kat"], [OUTSIDE])
        put([str(rng.randint(1, 12))], ["B-FLOOR"])
    if rng.random() < _P_DOOR:
        put(["no"], [OUTSIDE])
        put([str(rng.randint(1, 48))], ["B-DOOR"])
    if rng.random() < _P_VILLAGE:
        put(*_named_entity(rng, _VILLAGE_NAMES, [_VILLAGE_MARKER], "VILLAGE"))
    if rng.random() < _P_DISTRICT:
        put([rng.choice(_DISTRICTS)], ["B-DISTRICT"])
    if rng.random() < _P_CITY:
        put([rng.choice(_CITIES)], ["B-CITY"])
    if rng.random() < _P_POSTCODE:
        put([rng.choice(_POSTCODES)], ["B-POSTCODE"])
    if rng.random() < _P_COUNTRY:
        put([rng.choice(_COUNTRIES)], ["B-COUNTRY"])

    if not tokens:
        put([rng.choice(_CITIES)], ["B-CITY"])

    tokens = [turkish_lowercase(t) for t in tokens]
    return AddressSample(tuple(tokens), tuple(tags))


def generate_dataset(seed: int, size: int, schema: TagSchema) -> List[AddressSample]:
    """Deterministic synthetic corpus of ``size`` address queries."""
    if size < 1:
        raise InvalidSize(f"size must be >= 1, got {size}")
    rng = random.Random(seed)
    return [generate_sample(rng, schema) for _ in range(size)]
