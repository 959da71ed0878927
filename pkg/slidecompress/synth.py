"""
Synthetic slides with sparse diagnostic signal.

A slide is a grid of textured patches. Most patches are drawn from a
two-category background mix that depends on the slide's tumor-type
analogue; a few carry a rare marker category. Questions about a slide are
answerable from the generator metadata alone.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dataset import Manifest, VQARecord
from .errors import ConfigurationError, TilingError
from .utils import derive_seed

logger = logging.getLogger(__name__)

CATEGORY_NAMES = (
    'adipose', 'stroma', 'necrosis', 'mucin', 'lymphoid', 'muscle',
    'epithelium', 'vessel', 'keratin', 'glandular', 'fibrin', 'nerve',
    'cartilage', 'pigment', 'calcified', 'hemorrhage',
)

TUMOR_TYPES = (
    'amber', 'basalt', 'cobalt', 'dune', 'ember',
    'fjord', 'garnet', 'harbor', 'indigo', 'juniper',
)

MARKER_IDENTITY = 'marker-identity'
MAJORITY_TISSUE = 'majority-tissue'
MARKER_COUNT_BAND = 'marker-count-band'
TEMPLATES = (MARKER_IDENTITY, MAJORITY_TISSUE, MARKER_COUNT_BAND)

QUESTIONS = {
    MARKER_IDENTITY: 'Which rare pattern appears in only a few patches of this slide?',
    MAJORITY_TISSUE: 'Which tissue pattern covers most of this slide?',
    MARKER_COUNT_BAND: 'How many patches show the rare pattern?',
}

# (low, high) inclusive marker-count bounds.
COUNT_BANDS = (
    ('one patch', 1, 1),
    ('two to four patches', 2, 4),
    ('five to eight patches', 5, 8),
    ('nine or more patches', 9, None),
)

LETTERS = 'ABCD'

DOMINANT_WEIGHT = 0.8
MAX_RARITY = 0.1
MIN_CATEGORIES = 4

_TEXTURE_SEED = 0x5EED
_STRIPE_AMPLITUDE = 0.15
_PIXEL_NOISE = 0.03


def category_names(n_categories):
    if n_categories < MIN_CATEGORIES:
        raise ConfigurationError(
            'need at least {} categories for four distinct choices, got {}'.format(
                MIN_CATEGORIES, n_categories
            )
        )
    if n_categories > len(CATEGORY_NAMES):
        raise ConfigurationError(
            'at most {} categories are available, got {}'.format(
                len(CATEGORY_NAMES), n_categories
            )
        )
    return CATEGORY_NAMES[:n_categories]


def tissue_categories(n_categories):
    return range(n_categories // 2)


def marker_categories(n_categories):
    return range(n_categories // 2, n_categories)


def background_mix(tumor_type, n_categories):
    """Per-category background weights of a tumor-type analogue: a
    dominant and a secondary tissue category."""
    n_tissue = n_categories // 2
    dominant = tumor_type % n_tissue
    secondary = (tumor_type + 1 + tumor_type // n_tissue) % n_tissue
    if secondary == dominant:
        secondary = (dominant + 1) % n_tissue
    mix = np.zeros(n_categories)
    mix[dominant] = DOMINANT_WEIGHT
    mix[secondary] = 1.0 - DOMINANT_WEIGHT
    return tuple(float(w) for w in mix)


def count_band(marker_count):
    for index, (_, low, high) in enumerate(COUNT_BANDS):
        if marker_count >= low and (high is None or marker_count <= high):
            return index
    raise ValueError('marker count must be positive, got {}'.format(marker_count))


class SlideSpec:
    __slots__ = (
        'slide_id',
        'grid',
        'patch_px',
        'marker_category',
        'marker_rarity',
        'background_mix',
        'seed',
        'tumor_type',
    )

    def __init__(
        self,
        slide_id,
        grid,
        marker_category,
        background_mix,
        seed,
        patch_px=16,
        marker_rarity=0.02,
        tumor_type=0,
    ):
        self.slide_id = slide_id
        self.grid = tuple(grid)
        self.patch_px = patch_px
        self.marker_category = marker_category
        self.marker_rarity = marker_rarity
        self.background_mix = tuple(background_mix)
        self.seed = seed
        self.tumor_type = tumor_type

    @property
    def n_categories(self):
        return len(self.background_mix)

    @property
    def patch_count(self):
        return self.grid[0] * self.grid[1]

    def validate(self):
        category_names(self.n_categories)
        rows, cols = self.grid
        if rows * cols < 4:
            raise ConfigurationError(
                'grid {}x{} has fewer than 4 patches'.format(rows, cols)
            )
        if not 0 < self.marker_rarity <= MAX_RARITY:
            raise ConfigurationError(
                'marker_rarity must be in (0, {}], got {}'.format(
                    MAX_RARITY, self.marker_rarity
                )
            )
        if not 0 <= self.marker_category < self.n_categories:
            raise ConfigurationError(
                'marker category {} outside [0, {})'.format(
                    self.marker_category, self.n_categories
                )
            )
        if self.background_mix[self.marker_category] != 0:
            raise ConfigurationError(
                'marker category {} also appears in the background mix'.format(
                    self.marker_category
                )
            )
        total = sum(self.background_mix)
        if not np.isclose(total, 1.0):
            raise ConfigurationError(
                'background mix sums to {}, expected 1'.format(total)
            )
        return self

    def __repr__(self):
        return 'SlideSpec({!r}, grid={}x{}, marker={})'.format(
            self.slide_id, self.grid[0], self.grid[1], self.marker_category
        )


class Patch:
    __slots__ = ('pixels', 'category')

    def __init__(self, pixels, category=None):
        self.pixels = pixels
        self.category = category

    @property
    def patch_px(self):
        return self.pixels.shape[0]

    def __repr__(self):
        return 'Patch({}px, category={})'.format(self.patch_px, self.category)


class SlideMetadata:
    """Generator-side facts about one slide. Never shown to the model."""
    __slots__ = (
        'slide_id',
        'tumor_type',
        'grid',
        'patch_px',
        'marker_category',
        'marker_indices',
        'categories',
        'background_mix',
        'seed',
    )

    def __init__(self, slide_id, tumor_type, grid, patch_px, marker_category,
                 marker_indices, categories, background_mix, seed):
        self.slide_id = slide_id
        self.tumor_type = tumor_type
        self.grid = grid
        self.patch_px = patch_px
        self.marker_category = marker_category
        self.marker_indices = marker_indices
        self.categories = categories
        self.background_mix = background_mix
        self.seed = seed

    @property
    def n_categories(self):
        return len(self.background_mix)

    @property
    def marker_count(self):
        return len(self.marker_indices)

    @property
    def category_counts(self):
        return np.bincount(self.categories, minlength=self.n_categories)

    @property
    def majority_category(self):
        return int(np.argmax(self.category_counts))

    @property
    def tumor_type_name(self):
        return TUMOR_TYPES[self.tumor_type]


def _hsv_to_rgb(h, s, v):
    i = int(h * 6) % 6
    f = h * 6 - int(h * 6)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]


def texture_table(n_categories, patch_px):
    """Noise-free texture of every category: a distinct mean colour plus
    stripes of a distinct frequency and orientation."""
    rng = np.random.default_rng(_TEXTURE_SEED)
    coords = np.arange(patch_px) / patch_px
    textures = np.empty((n_categories, patch_px, patch_px, 3))
    for c in range(n_categories):
        color = np.array(_hsv_to_rgb(c / n_categories, 0.65, 0.45 + 0.3 * (c % 2)))
        frequency = 1 + (3 * c) % 7
        phase = rng.uniform(0, 2 * np.pi)
        wave = _STRIPE_AMPLITUDE * np.sin(2 * np.pi * frequency * coords + phase)
        if c % 2:
            stripes = np.broadcast_to(wave[:, None], (patch_px, patch_px))
        else:
            stripes = np.broadcast_to(wave[None, :], (patch_px, patch_px))
        textures[c] = color[None, None, :] + stripes[:, :, None]
    return textures


def tile(image, patch_px):
    """Cuts ``image`` (``H x W x 3``) into non-overlapping square patches
    in row-major order."""
    image = np.asarray(image)
    height, width = image.shape[:2]
    if patch_px < 1 or height % patch_px or width % patch_px:
        raise TilingError(
            'image of {}x{} pixels does not divide into {}px patches'.format(
                height, width, patch_px
            )
        )
    rows, cols = height // patch_px, width // patch_px
    blocks = image.reshape(rows, patch_px, cols, patch_px, -1).swapaxes(1, 2)
    return [Patch(blocks[r, c].copy()) for r in range(rows) for c in range(cols)]


def untile(patches, rows, cols):
    """Reassembles row-major ``patches`` into one image."""
    if len(patches) != rows * cols:
        raise TilingError('{} patches cannot fill a {}x{} grid'.format(
            len(patches), rows, cols
        ))
    p = patches[0].patch_px
    blocks = np.stack([patch.pixels for patch in patches])
    blocks = blocks.reshape(rows, cols, p, p, -1).swapaxes(1, 2)
    return blocks.reshape(rows * p, cols * p, -1)


def generate_slide(spec):
    """Renders a slide from ``spec``.

    Returns ``(patches, metadata)``. Marker patches come from a seeded
    Bernoulli draw per patch; when the draw is empty one patch is forced.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    rows, cols = spec.grid
    n = rows * cols
    p = spec.patch_px

    categories = rng.choice(spec.n_categories, size=n, p=np.asarray(spec.background_mix))
    is_marker = rng.random(n) < spec.marker_rarity
    if not is_marker.any():
        is_marker[rng.integers(n)] = True
    categories[is_marker] = spec.marker_category
    marker_indices = tuple(int(i) for i in np.flatnonzero(is_marker))

    textures = texture_table(spec.n_categories, p)
    noise = rng.normal(0.0, _PIXEL_NOISE, size=(n, p, p, 3))
    pixels = np.clip(textures[categories] + noise, 0.0, 1.0)
    image = pixels.reshape(rows, cols, p, p, 3).swapaxes(1, 2).reshape(rows * p, cols * p, 3)

    patches = tile(image, p)
    for patch, category in zip(patches, categories):
        patch.category = int(category)

    metadata = SlideMetadata(
        slide_id=spec.slide_id,
        tumor_type=spec.tumor_type,
        grid=spec.grid,
        patch_px=p,
        marker_category=spec.marker_category,
        marker_indices=marker_indices,
        categories=categories.astype(np.int64),
        background_mix=spec.background_mix,
        seed=spec.seed,
    )
    return patches, metadata


def _options(metadata, template_id, rng):
    names = category_names(metadata.n_categories)
    if template_id == MARKER_IDENTITY:
        gold = metadata.marker_category
    elif template_id == MAJORITY_TISSUE:
        background = metadata.categories.copy()
        background = background[background != metadata.marker_category]
        gold = int(np.argmax(np.bincount(background, minlength=metadata.n_categories)))
    elif template_id == MARKER_COUNT_BAND:
        gold = count_band(metadata.marker_count)
        others = [i for i in range(len(COUNT_BANDS)) if i != gold]
        return [COUNT_BANDS[gold][0]] + [COUNT_BANDS[i][0] for i in others]
    else:
        raise ConfigurationError(
            "unknown question template '{}', expected one of {}".format(
                template_id, ', '.join(TEMPLATES)
            )
        )
    others = [c for c in range(metadata.n_categories) if c != gold]
    distractors = rng.choice(others, size=3, replace=False)
    return [names[gold]] + [names[int(c)] for c in distractors]


def generate_qa(metadata, template_id, seed):
    """Builds one multiple-choice record whose gold choice follows from
    ``metadata``. Choice order is shuffled by ``seed``."""
    rng = np.random.default_rng(seed)
    options = _options(metadata, template_id, rng)
    order = rng.permutation(4)
    choices = tuple(options[i] for i in order)
    gold = LETTERS[int(np.flatnonzero(order == 0)[0])]
    return VQARecord(
        slide_id=metadata.slide_id,
        question=QUESTIONS[template_id],
        choices=choices,
        gold=gold,
        template_id=template_id,
        seed=seed,
    )


def answer_from_metadata(metadata, record):
    """Answers ``record`` by reading generator metadata only."""
    names = category_names(metadata.n_categories)
    if record.template_id == MARKER_IDENTITY:
        text = names[metadata.marker_category]
    elif record.template_id == MAJORITY_TISSUE:
        counts = metadata.category_counts
        counts[metadata.marker_category] = -1
        text = names[int(np.argmax(counts))]
    else:
        text = COUNT_BANDS[count_band(metadata.marker_count)][0]
    return LETTERS[record.choices.index(text)]


def template_corpus(n_categories):
    """Every piece of text the generator can emit."""
    texts = list(QUESTIONS.values())
    texts.extend(category_names(n_categories))
    texts.extend(band for band, _, _ in COUNT_BANDS)
    return texts


def slide_spec_for(index, config):
    """The ``SlideSpec`` of slide ``index`` in a dataset generated from ``config``."""
    tumor_type = index % len(TUMOR_TYPES)
    n_categories = config.n_categories
    rng = np.random.default_rng(derive_seed(config.seed, 'marker', index))
    markers = list(marker_categories(n_categories))
    return SlideSpec(
        slide_id='slide-{:04d}'.format(index),
        grid=config.grid,
        patch_px=config.patch_px,
        marker_category=int(markers[rng.integers(len(markers))]),
        marker_rarity=config.marker_rarity,
        background_mix=background_mix(tumor_type, n_categories),
        seed=derive_seed(config.seed, 'slide', index),
        tumor_type=tumor_type,
    )


def assign_splits(slide_ids, tumor_types, seed, ratios=(8, 1, 1)):
    """Assigns every slide to exactly one of train/val/test, 8:1:1 within
    each tumor type."""
    total = sum(ratios)
    by_type = {}
    for slide_id, tumor_type in zip(slide_ids, tumor_types):
        by_type.setdefault(tumor_type, []).append(slide_id)
    splits = {}
    for tumor_type in sorted(by_type):
        ids = sorted(by_type[tumor_type])
        rng = np.random.default_rng(derive_seed(seed, 'split', tumor_type))
        ids = [ids[i] for i in rng.permutation(len(ids))]
        n_val = int(round(len(ids) * ratios[1] / total))
        n_test = int(round(len(ids) * ratios[2] / total))
        for i, slide_id in enumerate(ids):
            if i < n_test:
                splits[slide_id] = 'test'
            elif i < n_test + n_val:
                splits[slide_id] = 'val'
            else:
                splits[slide_id] = 'train'
    return splits


def _generate_one(index, config, encoder):
    spec = slide_spec_for(index, config)
    patches, metadata = generate_slide(spec)
    features = encoder.encode_patches(patches).data
    records = [
        generate_qa(metadata, template_id,
                    derive_seed(config.seed, 'qa', spec.slide_id, template_id))
        for template_id in config.templates
    ]
    return metadata, features, records


def generate_dataset(config, encoder, feature_dir='features'):
    """Generates ``config.n_slides`` slides.

    Returns ``(manifest, features, metadata)`` where ``features`` maps
    slide ids to frozen-encoder feature matrices. The result does not
    depend on ``config.workers``.
    """
    indices = range(config.n_slides)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda i: _generate_one(i, config, encoder), indices))
    else:
        results = [_generate_one(i, config, encoder) for i in indices]

    metadata = {meta.slide_id: meta for meta, _, _ in results}
    features = {meta.slide_id: feats for meta, feats, _ in results}
    splits = assign_splits(
        [meta.slide_id for meta, _, _ in results],
        [meta.tumor_type for meta, _, _ in results],
        config.seed,
    )
    records = [record for _, _, recs in results for record in recs]
    manifest = Manifest(
        records=records,
        feature_files={
            slide_id: '{}/{}.tcpf'.format(feature_dir, slide_id)
            for slide_id in metadata
        },
        splits=splits,
        tumor_types={
            slide_id: meta.tumor_type_name for slide_id, meta in metadata.items()
        },
    )
    logger.info('generated %d slides and %d records', len(metadata), len(records))
    return manifest, features, metadata
