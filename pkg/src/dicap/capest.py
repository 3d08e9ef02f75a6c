"""Capacity estimation by alternating estimator and generator updates.

Repeats {k estimator ascent steps, 1 generator ascent step} on fresh
rollouts, then runs a long Monte-Carlo evaluation with frozen parameters to
produce the final estimate and report.
"""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines
from .channels import rollout
from .dine import DineModel, dv_value
from .nn import Adam, GradientError, Rng
from .ndt import NdtModel

LN2 = float(np.log(2.0))


@dataclass
class TrainConfig:
    batch_size: int = 32
    seq_len: int = 64
    dine_lr: float = 1e-4
    ndt_lr: float = 1e-4
    budget: int = 5000              # alternations
    dine_steps_per_ndt: int = 3
    warmup: int = 500               # estimator-only iterations before alternating
    power: float = 1.0
    feedback: bool = False
    eval_samples: int = 1_000_000
    eval_seq_len: int = 2048
    eval_batch: int = 32
    seed: int = 0
    dine_hidden: int = 64
    head_hidden: int = 64
    ndt_hidden: int = 64
    ref_margin: float = 0.05
    clip_norm: float = 1.0
    fb_norm_decay: float = 0.0

    def validate(self):
        positive = ("batch_size", "seq_len", "dine_lr", "ndt_lr", "budget",
                    "dine_steps_per_ndt", "power", "eval_samples",
                    "eval_seq_len", "eval_batch", "dine_hidden", "head_hidden",
                    "ndt_hidden")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.warmup < 0 or self.ref_margin < 0:
            raise ValueError("warmup and ref_margin must be nonnegative")
        if not 0.0 <= self.fb_norm_decay < 1.0:
            raise ValueError("fb_norm_decay must be in [0, 1)")
        if self.eval_samples < 10 ** 5:
            raise ValueError("eval_samples must be at least 1e5")


@dataclass
class EstimateReport:
    capacity_nats: float
    capacity_bits: float
    raw_estimate_nats: float
    d_y: float
    d_yx: float
    realized_power: float
    eval_samples: int
    curve: list
    config: dict
    channel: dict
    baseline_nats: float = None
    baseline_rel_err: float = None
    failed: bool = False
    failure_reason: str = ""
    wall_time_s: float = 0.0

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def baseline_for(spec, power, feedback):
    """Analytic capacity for the given channel, or None if unavailable."""
    if spec.family == "awgn":
        return baselines.awgn_capacity(power, spec.sigma2)
    if spec.family == "ma1":
        if feedback:
            trusted, _ = baselines.fb_baseline_trusted()
            if not trusted:
                return None
            return baselines.ma1_fb_capacity(power, spec.alpha).capacity_nats
        return baselines.ma1_ff_capacity(power, spec.alpha).capacity_nats
    return None


def monte_carlo_eval(dine, ndt, spec, samples, seed, seq_len=2048, batch=32,
                     fb_norm_decay=0.0):
    """Long evaluation with frozen models: fresh rollouts totaling ``samples``.

    Returns (estimate, d_y, d_yx, realized_power, actual sample count).
    """
    rng = Rng(seed)
    noise_gen = rng.stream("eval-ndt-noise")
    chan_gen = rng.stream("eval-channel")
    ref_gen = rng.stream("eval-reference")
    n_seq = -(-samples // seq_len)
    xs, ys = [], []
    sumsq = 0.0
    for start in range(0, n_seq, batch):
        b = min(batch, n_seq - start)
        ro = rollout(ndt, spec, b, seq_len, noise_gen, chan_gen,
                     need_cache=False, fb_norm_decay=fb_norm_decay)
        xs.append(ro.x)
        ys.append(ro.y)
        sumsq += float(np.sum(ro.x * ro.x))
    x = np.concatenate(xs, axis=0)
    y = np.concatenate(ys, axis=0)
    count = int(np.prod(y.shape[:2]))
    realized = sumsq / count
    box = dine.fit_box(y)
    parts = {k: [] for k in ("ty", "try", "tyx", "tryx")}
    for s in range(0, x.shape[0], batch):
        sl = slice(s, s + batch)
        y_ref = box.sample(ref_gen, y[sl].shape[0], seq_len)
        ty, tr, _ = dine.pot_y.forward(y[sl], y_ref, need_cache=False)
        jt = dine.joint(y[sl], x[sl])
        jr = dine.joint(y_ref, x[sl])
        tyx, trx, _ = dine.pot_yx.forward(jt, jr, need_cache=False)
        parts["ty"].append(ty)
        parts["try"].append(tr)
        parts["tyx"].append(tyx)
        parts["tryx"].append(trx)
    vy, _, _ = dv_value(np.concatenate(parts["ty"]), np.concatenate(parts["try"]))
    vyx, _, _ = dv_value(np.concatenate(parts["tyx"]), np.concatenate(parts["tryx"]))
    return vyx - vy, vy, vyx, realized, count


def estimate_capacity(spec, config):
    """Alternating maximization plus final Monte-Carlo evaluation."""
    config.validate()
    start_time = time.perf_counter()
    rng = Rng(config.seed)
    dine = DineModel(1, 1, config.dine_hidden, config.head_hidden,
                     config.ref_margin, rng=rng)
    ndt = NdtModel(1, 1, hidden=config.ndt_hidden,
                   dense_hidden=config.ndt_hidden, power=config.power,
                   feedback=config.feedback, gen=rng.stream("init-ndt"))
    adam_y = Adam(dine.pot_y.params(), lr=config.dine_lr,
                  clip_norm=config.clip_norm)
    adam_yx = Adam(dine.pot_yx.params(), lr=config.dine_lr,
                   clip_norm=config.clip_norm)
    adam_ndt = Adam(ndt.params(), lr=config.ndt_lr, clip_norm=config.clip_norm)
    noise_gen = rng.stream("ndt-noise")
    chan_gen = rng.stream("channel")
    ref_gen = rng.stream("dine-reference")
    B, T = config.batch_size, config.seq_len
    decay = config.fb_norm_decay

    def fresh(need_cache):
        return rollout(ndt, spec, B, T, noise_gen, chan_gen,
                       need_cache=need_cache, fb_norm_decay=decay)

    curve = []
    failed = False
    reason = ""
    try:
        for _ in range(config.warmup):
            ro = fresh(False)
            dine.train_step(ro.x, ro.y, ref_gen, adam_y, adam_yx)
        for it in range(config.budget):
            for _ in range(config.dine_steps_per_ndt):
                ro = fresh(False)
                vy, vyx = dine.train_step(ro.x, ro.y, ref_gen, adam_y, adam_yx)
            ro = fresh(True)
            box = dine.fit_box(ro.y)
            y_ref = box.sample(ref_gen, B, T)
            obj, dx, dy = dine.input_gradients(ro.x, ro.y, y_ref)
            adam_ndt.zero_grads()
            ro.backward(dx, dy)
            adam_ndt.step()
            curve.append((it, vy, vyx, obj, ro.realized_power))
    except GradientError as err:
        failed = True
        reason = str(err)

    if not failed:
        est, vy, vyx, realized, count = monte_carlo_eval(
            dine, ndt, spec, config.eval_samples, config.seed + 1,
            config.eval_seq_len, config.eval_batch, decay)
    else:
        est = vy = vyx = realized = 0.0
        count = 0

    base = baseline_for(spec, config.power, config.feedback)
    rel = None if base in (None, 0.0) or failed else abs(est - base) / base
    report = EstimateReport(
        capacity_nats=max(est, 0.0),
        capacity_bits=max(est, 0.0) / LN2,
        raw_estimate_nats=est,
        d_y=vy,
        d_yx=vyx,
        realized_power=realized,
        eval_samples=count,
        curve=curve,
        config=asdict(config),
        channel={"family": spec.family, "sigma2": spec.sigma2,
                 "alpha": spec.alpha},
        baseline_nats=base,
        baseline_rel_err=rel,
        failed=failed,
        failure_reason=reason,
        wall_time_s=time.perf_counter() - start_time,
    )
    return report, dine, ndt


def curve_summary(values, window=100):
    """Moving-average smoothing with plateau diagnostics.

    Returns {peak, final, ratio} of the smoothed curve (ratio = final/peak).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty curve")
    w = min(window, values.size)
    kernel = np.full(w, 1.0 / w)
    smoothed = np.convolve(values, kernel, mode="valid")
    peak = float(smoothed.max())
    final = float(smoothed[-1])
    ratio = final / peak if peak != 0.0 else 1.0
    return {"peak": peak, "final": final, "ratio": ratio, "window": w}
