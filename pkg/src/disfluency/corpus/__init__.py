from .align import DELETE, INSERT, MATCH, SUBSTITUTE, AlignOp, align_tokens, alignment_cost
from .categorize import (
    AUXILIARIES,
    KINDS,
    LENGTH_BUCKETS,
    WORD_CLASSES,
    DisfluencyCategory,
    categorize,
    is_content_word,
    is_repetition,
    length_bucket,
)
from .io import (
    apply_alignments,
    read_alignments,
    read_transcripts,
    write_alignments,
    write_transcripts,
)
from .lexicon import Lexicon, LexiconError, load_lexicon, parse_phone, save_lexicon
from .markup import DEFAULT_MERGE_TABLE, MarkupError, parse_markup, render_markup
from .silver import silver_remap
from .synth import ConfigError, SynthConfig, SynthCorpus, synth_generate
from .types import (
    DISCOURSE_MARKERS,
    FILLED_PAUSES,
    LABEL_TO_ID,
    LABELS,
    REPARANDUM_LABELS,
    DisfluencySpan,
    Token,
    Utterance,
    is_bio_consistent,
    labels_from_spans,
    make_token,
    repair_bio,
)
