"""asrkit: corpus selection, WER metrics, transducer loss, budget arithmetic."""

from .budget import (EncoderConfig, TrainPlan, budget_report, flops_total,
                     init_scale, loss_memory, param_breakdown, param_count)
from .errors import (AsrkitError, ConfigError, EmptyCorpusError,
                     InfeasibleBandError, ParseError, ValidationError)
from .manifest import (HypothesisPair, UtteranceRecord, WordSpan,
                       parse_hypothesis_pairs, parse_manifest, write_manifest)
from .metrics import (EditAlignment, NormalizerConfig, WordFrequencyTable,
                      build_freq_table, corpus_score, edit_align, is_rare,
                      load_freq_table, normalize, rare_wer, wer,
                      write_freq_table)
from .rnnt import (AlignmentBand, LossResult, RnntInstance,
                   band_from_word_spans, cell_count, enumerate_loss,
                   grad_check, rnnt_loss_full, rnnt_loss_restricted)
from .selection import (FilterDecision, FilterReason, PipelineConfig,
                        confidence_cut, disagreement_cut, disagreement_score,
                        rare_data_keep, run_pipeline, segment_utterance,
                        words_per_second)

__version__ = "0.1.0"
