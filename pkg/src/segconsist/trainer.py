"""Training regimes, optimization, and evaluation.

Three regimes share one loop: ``none`` trains on clean images with the
Jaccard loss; ``vanilla`` perturbs each sample independently with the
configured probability (image and mask in lockstep) and still trains on
the Jaccard loss alone; ``consistency`` runs the clean and perturbed
streams through the model per batch (two forward passes, one backward),
replays the geometric part of each perturbation on the label, and
combines the Jaccard loss with the inconsistency loss, weighted per
batch by the mean IoU of the thresholded clean predictions.

A run is fully deterministic given its config: shuffling, perturbation
draws, and validation perturbations all derive from the config seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import metrics, segmodel
from .loss import MaskQuartet, combined_loss, jaccard_loss, sil_loss
from .perturb import PerturbationSpec, apply_to_image, apply_to_mask, sample
from .segmodel import TinySegNet, forward
from .tensor import Tensor

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "EvalRecord",
    "desk_config",
    "paper_config",
    "adam_init",
    "adam_step",
    "cosine_warm_restart_lr",
    "train",
    "evaluate",
    "run_job",
]

REGIMES = ("none", "vanilla", "consistency")

# RNG stream salts so shuffling, train-time draws, and validation draws
# never alias.
_TRAIN_SALT = 101
_VAL_SALT = 202

HISTORY_COLUMNS = (
    "epoch",
    "train_loss",
    "seg_loss",
    "sil_loss",
    "iou_weight",
    "val_loss",
    "val_iou",
    "lr",
    "border_artifact_rate",
)


@dataclass
class TrainConfig:
    regime: str
    batch_size: int = 8
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    scheduler_t0: int = 10
    scheduler_t_mult: int = 2
    lr_min: float = 0.0
    max_epochs: int = 60
    patience: int = 20
    seed: int = 0
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    dynamic_weighting: bool = True
    border_margin: int = 2

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.batch_size < 1 or self.scheduler_t0 < 1 or self.scheduler_t_mult < 1:
            raise ValueError("batch_size, scheduler_t0, scheduler_t_mult must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["perturbation"] = self.perturbation.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "perturbation" in d and isinstance(d["perturbation"], dict):
            d["perturbation"] = PerturbationSpec.from_dict(d["perturbation"])
        return cls(**d)


def desk_config(regime: str, seed: int = 0, **overrides) -> TrainConfig:
    """Minutes-scale CPU defaults."""
    return TrainConfig(regime=regime, seed=seed, **overrides)


def paper_config(regime: str, seed: int = 0, **overrides) -> TrainConfig:
    """The reference hyperparameters: Adam at 1e-5, cosine warm restarts
    with T0=50 and T_mult=2, batch 8, up to 300 epochs."""
    defaults = dict(
        learning_rate=1e-5,
        scheduler_t0=50,
        scheduler_t_mult=2,
        max_epochs=300,
        batch_size=8,
    )
    defaults.update(overrides)
    return TrainConfig(regime=regime, seed=seed, **defaults)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    seg_loss: float
    sil_loss: float
    iou_weight: float
    val_loss: float
    val_iou: float
    lr: float
    border_artifact_rate: float


@dataclass
class TrainHistory:
    rows: list[EpochStats] = field(default_factory=list)

    def to_csv(self, path) -> None:
        lines = [",".join(HISTORY_COLUMNS)]
        for r in self.rows:
            lines.append(",".join(repr(getattr(r, c)) for c in HISTORY_COLUMNS))
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class EvalRecord:
    regime: str
    seed: int
    environment: str
    mean_iou: float


# -- optimization -----------------------------------------------------


def adam_init(params: dict[str, Tensor]) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(t.data) for k, t in params.items()},
        "v": {k: np.zeros_like(t.data) for k, t in params.items()},
    }


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> dict:
    """Bias-corrected Adam update, in place on the parameter tensors."""
    state["step"] += 1
    t = state["step"]
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise ValueError(f"adam_step: non-finite gradient for parameter {name!r}")
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
    return state


def cosine_warm_restart_lr(
    epoch: int, t0: int, t_mult: int, lr_max: float, lr_min: float = 0.0
) -> float:
    """Cosine annealing with warm restarts: cycle i has length
    t0 * t_mult**i and the rate returns to lr_max at each restart."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if t_mult == 1:
        t_i = t0
        t = epoch % t0
    else:
        cycle_start = 0
        t_i = t0
        while epoch >= cycle_start + t_i:
            cycle_start += t_i
            t_i *= t_mult
        t = epoch - cycle_start
    return lr_min + (lr_max - lr_min) * (1.0 + np.cos(np.pi * t / t_i)) / 2.0


# -- training ---------------------------------------------------------


def _mean_loss(losses: list[Tensor]) -> Tensor:
    total = losses[0]
    for l in losses[1:]:
        total = total + l
    return total * (1.0 / len(losses))


def _sample_tensors(rec) -> tuple[np.ndarray, np.ndarray]:
    return rec.image, rec.mask


def _batch_losses(model, batch, pert_spec, seeds):
    """Forward both streams for one consistency batch; returns the mean
    segmentation loss, mean inconsistency loss, and the batch IoU
    weight (constant, from thresholded clean predictions)."""
    seg_terms, sil_terms, ious = [], [], []
    for rec, s in zip(batch, seeds):
        img, mask = _sample_tensors(rec)
        y = Tensor(mask[None].astype(np.float64))
        yhat = forward(model, img)
        p = sample(pert_spec, s)
        ahat = forward(model, apply_to_image(p, img))
        a = Tensor(apply_to_mask(p, mask)[None].astype(np.float64))
        seg_terms.append(jaccard_loss(y, yhat))
        sil_terms.append(sil_loss(MaskQuartet(y, yhat, a, ahat)))
        ious.append(metrics.iou(mask, metrics.threshold(yhat)[0]))
    return _mean_loss(seg_terms), _mean_loss(sil_terms), float(np.mean(ious))


def train(config: TrainConfig, suite: dict) -> tuple[TinySegNet, TrainHistory]:
    """Run one training job on ``suite`` (needs 'train' and 'val' keys);
    early stopping restores the best-validation-loss parameters."""
    train_set = suite["train"]
    val_set = suite["val"]
    if not train_set or not val_set:
        raise ValueError("train: suite must contain non-empty 'train' and 'val'")

    model = segmodel.init(config.seed)
    model.regime = config.regime
    state = adam_init(model.params)
    rng = np.random.default_rng([config.seed, _TRAIN_SALT])
    history = TrainHistory()

    consist_spec = replace(config.perturbation, apply_probability=1.0)
    # Fixed per-sample validation perturbations keep epoch losses
    # comparable for early stopping.
    val_perts = [
        sample(consist_spec, np.random.SeedSequence([config.seed, _VAL_SALT, i]))
        for i in range(len(val_set))
    ]

    best_loss = np.inf
    best_snap = model.snapshot()
    best_epoch = -1

    for epoch in range(config.max_epochs):
        lr = cosine_warm_restart_lr(
            epoch, config.scheduler_t0, config.scheduler_t_mult,
            config.learning_rate, config.lr_min,
        )
        order = rng.permutation(len(train_set))
        ep_loss, ep_seg, ep_sil, ep_w = [], [], [], []

        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            seeds = [int(rng.integers(0, 2**31)) for _ in batch]
            model.zero_grads()

            if config.regime == "none":
                seg = _mean_loss(
                    [
                        jaccard_loss(
                            Tensor(rec.mask[None].astype(np.float64)),
                            forward(model, rec.image),
                        )
                        for rec in batch
                    ]
                )
                loss, sil_val, w = seg, 0.0, 0.0
            elif config.regime == "vanilla":
                terms = []
                for rec, s in zip(batch, seeds):
                    p = sample(config.perturbation, s)
                    img = apply_to_image(p, rec.image)
                    mask = apply_to_mask(p, rec.mask)
                    terms.append(
                        jaccard_loss(
                            Tensor(mask[None].astype(np.float64)), forward(model, img)
                        )
                    )
                seg = _mean_loss(terms)
                loss, sil_val, w = seg, 0.0, 0.0
            else:
                seg, sil, w = _batch_losses(model, batch, consist_spec, seeds)
                if config.dynamic_weighting:
                    loss = combined_loss(seg, sil, w)
                else:
                    loss = 0.5 * (seg + sil)
                sil_val = float(sil.data)

            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            loss.backward()
            grads = {k: t.grad for k, t in model.params.items()}
            adam_step(model.params, grads, state, lr, config.beta1, config.beta2, config.adam_eps)

            ep_loss.append(loss_val)
            ep_seg.append(float(seg.data))
            ep_sil.append(sil_val)
            ep_w.append(w)

        val_loss, val_iou, border = _validate(model, config, val_set, val_perts)
        history.rows.append(
            EpochStats(
                epoch=epoch,
                train_loss=float(np.mean(ep_loss)),
                seg_loss=float(np.mean(ep_seg)),
                sil_loss=float(np.mean(ep_sil)),
                iou_weight=float(np.mean(ep_w)),
                val_loss=val_loss,
                val_iou=val_iou,
                lr=float(lr),
                border_artifact_rate=border,
            )
        )

        if val_loss < best_loss:
            best_loss = val_loss
            best_snap = model.snapshot()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break

    model.restore(best_snap)
    return model, history


def _validate(model, config, val_set, val_perts) -> tuple[float, float, float]:
    """Regime-specific validation loss plus clean IoU and the border
    artifact rate of the thresholded clean predictions."""
    seg_vals, sil_vals, ious, borders = [], [], [], []
    for i, rec in enumerate(val_set):
        y = Tensor(rec.mask[None].astype(np.float64))
        yhat = forward(model, rec.image)
        seg_vals.append(float(jaccard_loss(y, yhat).data))
        pred = metrics.threshold(yhat)[0]
        ious.append(metrics.iou(rec.mask, pred))
        borders.append(metrics.border_artifact_rate(pred, config.border_margin))
        if config.regime == "consistency":
            p = val_perts[i]
            ahat = forward(model, apply_to_image(p, rec.image))
            a = Tensor(apply_to_mask(p, rec.mask)[None].astype(np.float64))
            sil_vals.append(float(sil_loss(MaskQuartet(y, yhat, a, ahat)).data))

    seg = float(np.mean(seg_vals))
    mean_iou = float(np.mean(ious))
    border = float(np.mean(borders))
    if config.regime != "consistency":
        return seg, mean_iou, border
    sil = float(np.mean(sil_vals))
    if config.dynamic_weighting:
        w = mean_iou
        return (1.0 - w) * seg + w * sil, mean_iou, border
    return 0.5 * (seg + sil), mean_iou, border


def evaluate(model: TinySegNet, records) -> tuple[list[float], float]:
    """Per-image IoU at threshold 0.5 plus the environment mean."""
    ious = [
        metrics.iou(rec.mask, metrics.threshold(forward(model, rec.image))[0])
        for rec in records
    ]
    if not ious:
        return ious, 0.0
    return ious, float(np.mean(ious))


def run_job(config: TrainConfig, suite: dict, out_dir, eval_envs=None) -> list[EvalRecord]:
    """Train one (regime, seed) job and write its artifacts: history CSV,
    model checkpoint, and a JSON summary. Returns the per-environment
    evaluation records."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    model, history = train(config, suite)
    wall = time.perf_counter() - t0

    if eval_envs is None:
        eval_envs = [k for k in ("test_id", "ood_color", "ood_noise", "ood_shape") if k in suite]
    records = []
    env_means = {}
    for env in eval_envs:
        _, mean_iou = evaluate(model, suite[env])
        env_means[env] = mean_iou
        records.append(EvalRecord(config.regime, config.seed, env, mean_iou))

    history.to_csv(out / "history.csv")
    segmodel.save_model(model, out / "model.bin")
    summary = {
        "config": config.to_dict(),
        "epochs_ran": len(history.rows),
        "best_val_loss": min((r.val_loss for r in history.rows), default=None),
        "final_val_iou": history.rows[-1].val_iou if history.rows else None,
        "env_mean_iou": env_means,
        "wall_time_s": wall,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return records
