"""Frame-descriptor encoding and linear classification for action recognition.

The package turns per-frame deep-network descriptors (stored as DESC1 files
listed in a dataset manifest) into fixed-length video encodings -- average
pooling, score pooling, VLAD and Fisher vectors, plus their latent-concept
variants -- and classifies them with one-vs-all linear SVMs.
"""

from .datamodel import (
    ActivationTensor,
    Dataset,
    DescriptorFormatError,
    DescriptorMatrix,
    DegenerateInputError,
    EmptyVideoError,
    Encoding,
    ManifestError,
    VideoRecord,
    load_manifest,
    read_descriptor_file,
    save_manifest,
    write_descriptor_file,
)
from .reduce import PcaModel, apply_pca, fit_pca, load_pca, save_pca
from .codebook import Codebook, assign, assign_all, fit_kmeans, load_codebook, save_codebook
from .gmm import GmmModel, fit_gmm, load_gmm, posteriors, save_gmm
from .encode import (
    EncoderConfig,
    average_pool,
    encode_fisher,
    encode_lcd,
    encode_vlad,
    fuse,
    l2_normalize,
    lcd_reshape,
    load_encoding,
    objects1k,
    power_law,
    save_encoding,
)
from .classify import (
    EvaluationReport,
    SvmModel,
    decision_scores,
    evaluate,
    load_svm,
    predict,
    save_svm,
    train_one_vs_all,
)
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ActivationTensor",
    "Codebook",
    "Dataset",
    "DegenerateInputError",
    "DescriptorFormatError",
    "DescriptorMatrix",
    "EmptyVideoError",
    "EncoderConfig",
    "Encoding",
    "EvaluationReport",
    "GmmModel",
    "ManifestError",
    "PcaModel",
    "SvmModel",
    "SynthSpec",
    "VideoRecord",
    "apply_pca",
    "assign",
    "assign_all",
    "average_pool",
    "decision_scores",
    "encode_fisher",
    "encode_lcd",
    "encode_vlad",
    "evaluate",
    "fit_gmm",
    "fit_kmeans",
    "fit_pca",
    "fuse",
    "generate",
    "l2_normalize",
    "lcd_reshape",
    "load_codebook",
    "load_encoding",
    "load_gmm",
    "load_manifest",
    "load_pca",
    "load_svm",
    "objects1k",
    "posteriors",
    "power_law",
    "predict",
    "read_descriptor_file",
    "save_codebook",
    "save_encoding",
    "save_gmm",
    "save_manifest",
    "save_pca",
    "save_svm",
    "train_one_vs_all",
    "write_descriptor_file",
]
