"""From-scratch learners and their preprocessing, registered under the ids
experiment configs use as entry points."""

from ..contract import register_learner
from .nn import Mlp, evaluate, prune_magnitude, train_step
from .porter import porter_stem
from .synth import (
    FASHION_CLASSES,
    NEWS_CATEGORIES,
    decode_image,
    encode_image,
    images_to_files,
    synth_corpus,
    synth_images,
)
from .text import LabelEncoding, Vocabulary, tokenize, vectorize
from .trials import ImageMlpTrial, TextMlpTrial

TEXT_LEARNER_ID = "text-mlp-5"
IMAGE_LEARNER_ID = "image-mlp"

register_learner(TEXT_LEARNER_ID, TextMlpTrial)
register_learner(IMAGE_LEARNER_ID, ImageMlpTrial)

__all__ = [
    "Mlp",
    "train_step",
    "evaluate",
    "prune_magnitude",
    "porter_stem",
    "tokenize",
    "vectorize",
    "Vocabulary",
    "LabelEncoding",
    "synth_corpus",
    "synth_images",
    "images_to_files",
    "encode_image",
    "decode_image",
    "NEWS_CATEGORIES",
    "FASHION_CLASSES",
    "TextMlpTrial",
    "ImageMlpTrial",
    "TEXT_LEARNER_ID",
    "IMAGE_LEARNER_ID",
]
