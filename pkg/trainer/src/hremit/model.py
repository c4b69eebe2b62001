"""A small two-branch network mapping window features to HR bin logits.

The spectral branch embeds the (sub-windows, freq bins, 2) spectrogram with
two 3x3 convolutions, averages over the sub-window axis and encodes the
frequency profile down to a latent vector h.  The time branch runs strided
1-D convolutions with max pooling over the 64 Hz waveform and summarizes it
with a two-layer LSTM into a weighting vector v and a feature vector s.
The branches are fused as a residual on h through additive attention,

    h_hat = h + tanh(W_v [h; v] + b_v) * relu(W_s [h; s] + b_s),

and a two-layer head turns h_hat into one logit per HR bin.  Deliberately
tiny: it keeps the dual-branch shape at a width that trains in seconds on a
CPU, not a full-scale architecture.
"""

from __future__ import annotations

import torch
from torch import nn

from .frontend import SPEC_BINS


class EmissionNet(nn.Module):
    def __init__(self, bins: int = 64, latent: int = 24, conv_width: int = 8):
        super().__init__()
        w = conv_width
        self.spec_embed = nn.Sequential(
            nn.Conv2d(2, w, kernel_size=3, padding=1), nn.ReLU(),
            nn.Conv2d(w, w, kernel_size=3, padding=1), nn.ReLU(),
        )
        self.spec_encode = nn.Sequential(
            nn.Conv1d(w, 2 * w, kernel_size=3, padding=1), nn.ReLU(), nn.MaxPool1d(2),
            nn.Conv1d(2 * w, 4 * w, kernel_size=3, padding=1), nn.ReLU(), nn.MaxPool1d(2),
        )
        self.to_latent = nn.Linear(4 * w * (SPEC_BINS // 4), latent)

        self.time_conv = nn.Sequential(
            nn.Conv1d(1, w, kernel_size=15, stride=2), nn.ReLU(), nn.MaxPool1d(4),
            nn.Conv1d(w, 2 * w, kernel_size=15, stride=2), nn.ReLU(), nn.MaxPool1d(4),
        )
        self.time_lstm = nn.LSTM(2 * w, latent, num_layers=2, batch_first=True)
        self.v_head = nn.Linear(latent, latent)
        self.s_head = nn.Linear(latent, latent)

        self.fuse_v = nn.Linear(2 * latent, latent)
        self.fuse_s = nn.Linear(2 * latent, latent)

        self.head = nn.Sequential(
            nn.Linear(latent, 2 * latent), nn.ReLU(),
            nn.Linear(2 * latent, bins),
        )

    def forward(self, time_domain: torch.Tensor, spectrogram: torch.Tensor) -> torch.Tensor:
        """(B, TIME_SAMPLES) and (B, SUB_COUNT, SPEC_BINS, 2) to (B, bins) logits."""
        sg = spectrogram.permute(0, 3, 1, 2)          # (B, 2, sub, freq)
        e = self.spec_embed(sg).mean(dim=2)           # (B, w, freq)
        e = self.spec_encode(e)
        h = self.to_latent(e.flatten(start_dim=1))    # (B, latent)

        t = self.time_conv(time_domain.unsqueeze(1))  # (B, 2w, steps)
        seq_out, _ = self.time_lstm(t.permute(0, 2, 1))
        z = seq_out[:, -1]                            # (B, latent)
        v = self.v_head(z)
        s = self.s_head(z)

        gate = torch.tanh(self.fuse_v(torch.cat([h, v], dim=1)))
        feat = torch.relu(self.fuse_s(torch.cat([h, s], dim=1)))
        h_hat = h + gate * feat
        return self.head(h_hat)


def soft_cross_entropy(logits: torch.Tensor, targets: torch.Tensor,
                       floor: float = 1e-12) -> torch.Tensor:
    """Mean of -sum(target * ln softmax(logits)) with the probability floored."""
    probs = torch.softmax(logits, dim=-1).clamp(min=floor)
    return -(targets * probs.log()).sum(dim=-1).mean()
