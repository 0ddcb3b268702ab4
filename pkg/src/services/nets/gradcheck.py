import logging
from typing import List

from src.schemas.nets.models import AutoencoderConfig, RemaskMode, StackConfig
from src.schemas.pretrain.models import MaskPlan
from src.schemas.tensorcore.models import GradcheckResult
from src.schemas.tokenize.models import AtomVocabulary
from src.services.molgraph.graph_ops import make_batch
from src.services.molgraph.smiles import parse_smiles
from src.services.seeding import stream_generator
from src.services.tensorcore import check_gradients, mse_loss, row_select

from .autoencoder import BatchContext, decode, encode
from .init import init_autoencoder

logger = logging.getLogger(__name__)

PIPELINE_TOLERANCE = 1e-3
PIPELINE_MOLECULE = "CC(=O)NCO"  # six heavy atoms


def check_pipeline(remask: RemaskMode = "v2", seed: int = 0, tolerance: float = PIPELINE_TOLERANCE) -> GradcheckResult:
    """
    Compare tape gradients of encode -> decode -> mse at the masked rows with central differences,
    over every parameter of a small gts_small / gts_tiny autoencoder.
    """
    rng = stream_generator(seed, f"gradcheck.pipeline.{remask}")
    graph = parse_smiles(PIPELINE_MOLECULE)
    batch = make_batch([graph])
    context = BatchContext.from_batch(batch)
    vocab = AtomVocabulary(atomic_numbers=tuple(sorted({int(z) for z in graph.atomic_numbers})))
    cfg = AutoencoderConfig(
        encoder=StackConfig(preset="gts_small", gin_layers=3, attn_layers=1, model_dim=6, edge_features=True),
        decoder=StackConfig(preset="gts_tiny", gin_layers=1, attn_layers=1, model_dim=5),
        num_embeddings=vocab.num_rows,
        mask_id=vocab.mask_id,
        output_dim=4,
    )
    params = init_autoencoder(cfg, rng)
    plan = MaskPlan(masked=(1, 4), ratio=0.35, seed=seed)
    ids = vocab.indices(graph.atomic_numbers)
    ids[list(plan.masked)] = vocab.mask_id
    target = rng.standard_normal((plan.size, cfg.output_dim))

    def loss_fn():
        z = decode(encode(ids, context, plan, params, cfg, remask), context, params, cfg)
        return mse_loss(row_select(z, plan.masked), target)

    error = check_gradients(loss_fn, list(params))
    logger.debug(f"pipeline gradcheck (remask {remask}): relative error {error:.3e}")
    return GradcheckResult(name=f"pipeline_{remask}", instances=1, max_relative_error=error, tolerance=tolerance)


def run_pipeline_suite(seed: int = 0) -> List[GradcheckResult]:
    return [check_pipeline(remask, seed=seed) for remask in ("none", "v1", "v2")]
