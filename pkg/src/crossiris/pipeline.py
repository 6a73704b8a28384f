"""End-to-end template extraction: segment, unwrap, encode."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin

from .encoding import GaborPhaseEncoder, _params_digest
from .normalization import RubberSheetNormalizer
from .segmentation import IrisSegmenter
from .types import EyeImage, IrisCode


class IrisTemplateExtractor(BaseEstimator, TransformerMixin):
    """Composes the three pipeline stages into one image -> code transformer.

    Stage estimators passed as None are replaced by defaults at call time,
    leaving the constructor arguments untouched for get_params round-trips.
    """

    def __init__(self, segmenter=None, normalizer=None, encoder=None):
        self.segmenter = segmenter
        self.normalizer = normalizer
        self.encoder = encoder

    def _stages(self):
        return (
            self.segmenter if self.segmenter is not None else IrisSegmenter(),
            self.normalizer if self.normalizer is not None else RubberSheetNormalizer(),
            self.encoder if self.encoder is not None else GaborPhaseEncoder(),
        )

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> list[IrisCode]:
        return [self.extract(img) for img in X]

    def extract(self, img: EyeImage) -> IrisCode:
        segmenter, normalizer, encoder = self._stages()
        seg = segmenter.segment(img)
        normalized = normalizer.normalize(img, seg)
        return encoder.encode(normalized)

    @property
    def pipeline_digest(self) -> str:
        """Digest over every parameter that shapes the produced template."""
        segmenter, normalizer, encoder = self._stages()
        return _params_digest(
            {
                "segmenter": segmenter.get_params(),
                "normalizer": normalizer.get_params(),
                "encoder": encoder.params_digest,
            }
        )
