import numpy as np
import pytest

from crossfp import evaluation, fusion, pipeline, synth
from crossfp.config import PipelineConfig


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """4 fingers x 2 sensors x 2 impressions, shared across tests."""
    root = tmp_path_factory.mktemp("corpus")
    synth.generate_synthetic_corpus(root, n_fingers=4, impressions_per_sensor=2, seed=11)
    return root


@pytest.fixture(scope="session")
def small_model(small_corpus):
    """CCA model fitted on the sensorA half of the small corpus."""
    config = PipelineConfig()
    images = evaluation.scan_dataset(small_corpus / "sensorA")
    pairs = pipeline.extract_many([img.path for img in images], config)
    pair_set = fusion.DescriptorPairSet(
        x=np.stack([p.coror for p in pairs], axis=1),
        y=np.stack([p.gaborhog for p in pairs], axis=1),
    )
    return fusion.fit_cca(pair_set)
