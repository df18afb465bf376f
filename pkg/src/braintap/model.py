"""Full model: two encoders tied by mutual distillation, prior-gated attention,
and a shared classifier head, plus checkpoint (de)serialization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import amd as amd_mod
from . import autograd as ag
from . import encoder as enc
from . import spf as spf_mod
from .config import TrainConfig

CHECKPOINT_VERSION = 1


@dataclass
class ForwardResult:
    logit: ag.Tensor
    distill_losses: list  # per-exchange scalar Tensors
    gate: ag.Tensor | None  # N x N gate before diagonal handling, or None
    attention: dict = field(default_factory=dict)  # (modality, layer) -> list of maps


class BrainTAP:
    """Parameter container and forward pass for one subject at a time."""

    def __init__(self, cfg: TrainConfig, n_rois: int, n_priors: int):
        self.cfg = cfg
        self.n_rois = n_rois
        self.n_priors = n_priors
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d
        self.enc_fc = enc.EncoderParams.init(rng, n_rois, d, cfg.d_ff, cfg.n_layers)
        self.enc_sc = enc.EncoderParams.init(rng, n_rois, d, cfg.d_ff, cfg.n_layers)
        self.amd_layers = [
            amd_mod.AmdLayerParams.init(rng, d, cfg.d_distill)
            for _ in range(cfg.n_layers)
        ]
        self.spf = spf_mod.SpfParams.init(rng, n_rois, n_priors, d, cfg.z_dim)
        self.head = enc.HeadParams.init(rng, d)

    def named_params(self):
        out = self.enc_fc.named("enc_fc") + self.enc_sc.named("enc_sc")
        for i, layer in enumerate(self.amd_layers):
            out += layer.named(f"amd{i}")
        out += self.spf.named("spf")
        out += self.head.named("head")
        return out

    def parameters(self):
        return [t for _, t in self.named_params()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def _exchange_at(self, layer_idx):
        cfg = self.cfg
        if not cfg.amd_enabled:
            return False
        return layer_idx < cfg.n_layers - 1 or cfg.final_layer_exchange

    def forward(self, fc, sc, priors, detached_ratios=None, record_attention=False):
        """Run one subject; fc and sc are N x N arrays.

        detached_ratios optionally maps layer index -> (beta_bar, gamma_bar)
        frozen copies used inside the distillation loss (finite-difference
        oracle support; see amd.amd_exchange).
        """
        cfg = self.cfg
        x_fc = enc.embed_tokens(ag.Tensor(fc), self.enc_fc)
        x_sc = enc.embed_tokens(ag.Tensor(sc), self.enc_sc)

        gate_matrix = None
        bias = None
        if cfg.spf_enabled:
            z = spf_mod.subject_embedding(x_fc, x_sc, self.spf)
            score = spf_mod.score_matrix(
                z, priors, self.spf,
                gspf=cfg.gspf_enabled, pspf=cfg.pspf_enabled,
            )
            gate_matrix = spf_mod.gate(score, cfg.tau_spf)
            bias = spf_mod.attention_bias(gate_matrix, cfg.zero_gate_diagonal)

        distill_losses = []
        attention = {}
        for l in range(cfg.n_layers):
            out_fc = enc.encoder_layer(
                x_fc, self.enc_fc.layers[l], cfg.n_heads,
                bias=bias if cfg.spf_fc_enabled else None,
                eta=cfg.eta, layer_norm=cfg.layer_norm,
            )
            out_sc = enc.encoder_layer(
                x_sc, self.enc_sc.layers[l], cfg.n_heads,
                bias=bias if cfg.spf_sc_enabled else None,
                eta=cfg.eta, layer_norm=cfg.layer_norm,
            )
            x_fc, x_sc = out_fc.tokens, out_sc.tokens
            if record_attention:
                attention[("fc", l)] = out_fc.attention
                attention[("sc", l)] = out_sc.attention
            if self._exchange_at(l):
                ratios = None if detached_ratios is None else detached_ratios[l]
                ex = amd_mod.amd_exchange(
                    x_fc, x_sc, self.amd_layers[l], cfg.tau_amd,
                    detached_ratios=ratios,
                )
                x_fc, x_sc, = ex.x_fc, ex.x_sc
                distill_losses.append(ex.loss)

        logit = enc.classify(x_fc, x_sc, self.head)
        return ForwardResult(
            logit=logit, distill_losses=distill_losses,
            gate=gate_matrix, attention=attention,
        )

    def gate_for(self, subject, priors):
        """Per-subject gate matrix as a plain array (no tape)."""
        with ag.no_grad():
            result = self.forward(subject.fc, subject.sc, priors)
        if result.gate is None:
            raise ag.ParameterError("gate requested but SPF is disabled in this config")
        return result.gate.data.copy()

    def predict(self, subject, priors):
        """Disease probability for one subject (no tape)."""
        with ag.no_grad():
            result = self.forward(subject.fc, subject.sc, priors)
        return 1.0 / (1.0 + np.exp(-result.logit.item()))

    def report_ratios(self):
        return amd_mod.report_ratios(self.amd_layers)

    # checkpoint format: npz with a version scalar, the config JSON, model
    # dimensions, and one array per named parameter under "param:<name>"
    def save(self, path):
        arrays = {f"param:{name}": t.data for name, t in self.named_params()}
        np.savez(
            path,
            checkpoint_version=np.array(CHECKPOINT_VERSION),
            config_json=np.array(self.cfg.to_json()),
            n_rois=np.array(self.n_rois),
            n_priors=np.array(self.n_priors),
            **arrays,
        )

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as archive:
            version = int(archive["checkpoint_version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            cfg = TrainConfig.from_json(str(archive["config_json"]))
            model = cls(cfg, int(archive["n_rois"]), int(archive["n_priors"]))
            for name, t in model.named_params():
                stored = archive[f"param:{name}"]
                if stored.shape != t.data.shape:
                    raise ValueError(f"checkpoint shape mismatch for {name}")
                t.data = stored.astype(np.float64)
        return model

    def state_arrays(self):
        return {name: t.data.copy() for name, t in self.named_params()}

    def load_state_arrays(self, state):
        for name, t in self.named_params():
            t.data = state[name].copy()
