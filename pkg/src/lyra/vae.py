"""Artist-conditioned sentence VAE.

Bidirectional LSTM encoder over the content tokens, diagonal-Gaussian
latent, LSTM decoder whose initial state comes from z and whose input at
every time step is the word embedding concatenated with the conditioning
artist's embedding row. Trained on teacher-forced reconstruction with word
dropout on the decoder inputs and a linearly annealed KL coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import BOS, EOS, PAD, UNK, ArtistId, EncodedLine, Vocabulary, decode_ids
from .layers import LstmCell, dense, dense_params
from .spectro import ArtistEmbeddingMatrix, onehot_embeddings, random_embeddings

# trainable / frozen artist-embedding variants
CONDITIONING_MODES = ("onehot", "randT", "randNT", "audioT", "audioNT")
TRAINABLE_MODES = ("randT", "audioT")
AUDIO_MODES = ("audioT", "audioNT")


@dataclass
class AnnealSchedule:
    total_steps: int = 3000

    def weight(self, step: int) -> float:
        if step < 0:
            raise ValueError(f"step must be >= 0, got {step}")
        return min(step / self.total_steps, 1.0)


def kl_weight(step: int, schedule: AnnealSchedule) -> float:
    return schedule.weight(step)


@dataclass
class VaeConfig:
    word_emb_dim: int = 300
    encoder_hidden: int = 100  # per direction
    latent_dim: int = 64
    decoder_hidden: int = 256
    artist_emb_dim: int = 50  # ignored for onehot (uses K)
    word_dropout: float = 0.5
    kl_anneal_steps: int = 3000
    max_decode_len: int = 20

    def __post_init__(self):
        for name in ("word_emb_dim", "encoder_hidden", "latent_dim", "decoder_hidden",
                     "artist_emb_dim", "kl_anneal_steps", "max_decode_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.word_dropout <= 1.0:
            raise ValueError("word_dropout must be in [0,1]")

    @property
    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(total_steps=self.kl_anneal_steps)


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> float:
    """KL(N(mu, diag exp(logvar)) || N(0, I)) in nats, closed form."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    return float(0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar))


def reparameterize(mu: np.ndarray, logvar: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """z = mu + exp(logvar / 2) * eps."""
    if np.shape(mu) != np.shape(logvar) or np.shape(mu) != np.shape(eps):
        raise ValueError("mu, logvar and eps must share a shape")
    return mu + np.exp(0.5 * np.asarray(logvar)) * eps


def word_dropout(ids: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Replace decoder-input tokens by UNK with probability p; BOS/PAD kept."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"dropout probability must be in [0,1], got {p}")
    ids = np.asarray(ids, dtype=np.int64)
    out = ids.copy()
    if p == 0.0:
        return out
    drop = (rng.random(ids.shape) < p) & (ids != BOS) & (ids != PAD)
    out[drop] = UNK
    return out


class VaeModel:
    """Parameters plus the vocabulary and artist manifest they were built for."""

    def __init__(
        self,
        vocab: Vocabulary,
        artists: list[ArtistId],
        config: VaeConfig,
        mode: str,
        seed: int = 0,
        artist_embeddings: ArtistEmbeddingMatrix | None = None,
    ):
        if mode not in CONDITIONING_MODES:
            raise ValueError(f"unknown conditioning mode {mode!r}")
        self.vocab = vocab
        self.artists = list(artists)
        self.mode = mode
        k = len(artists)

        names = [a.name for a in artists]
        if mode == "onehot":
            emb = onehot_embeddings(names)
            config = replace(config, artist_emb_dim=k)
        elif mode in AUDIO_MODES:
            if artist_embeddings is None or artist_embeddings.provenance != "audio":
                raise ValueError(f"audio embeddings required for mode {mode}")
            if artist_embeddings.matrix.shape != (k, config.artist_emb_dim):
                raise ValueError(
                    f"artist embedding matrix {artist_embeddings.matrix.shape} does not "
                    f"match ({k}, {config.artist_emb_dim})"
                )
            emb = artist_embeddings
        else:
            emb = random_embeddings(names, config.artist_emb_dim, seed=seed + 7)
        self.config = config
        self.artist_provenance = emb.provenance

        rng = np.random.default_rng(seed)
        v = vocab.size
        e, h = config.word_emb_dim, config.encoder_hidden
        lat, d, a = config.latent_dim, config.decoder_hidden, config.artist_emb_dim

        self.word_emb = Tensor(rng.normal(scale=0.1, size=(v, e)), requires_grad=True)
        self.enc_fwd = LstmCell(rng, e, h)
        self.enc_bwd = LstmCell(rng, e, h)
        self.w_mu, self.b_mu = dense_params(rng, 2 * h, lat)
        self.w_logvar, self.b_logvar = dense_params(rng, 2 * h, lat)
        self.w_state, self.b_state = dense_params(rng, lat, 2 * d)
        self.dec = LstmCell(rng, e + a, d)
        self.w_out, self.b_out = dense_params(rng, d, v)
        self.artist_emb = Tensor(
            emb.matrix.copy(), requires_grad=mode in TRAINABLE_MODES
        )

    @property
    def n_artists(self) -> int:
        return len(self.artists)

    def named_params(self) -> dict[str, Tensor]:
        return {
            "word_emb": self.word_emb,
            "enc_fwd.w": self.enc_fwd.w,
            "enc_fwd.b": self.enc_fwd.b,
            "enc_bwd.w": self.enc_bwd.w,
            "enc_bwd.b": self.enc_bwd.b,
            "w_mu": self.w_mu,
            "b_mu": self.b_mu,
            "w_logvar": self.w_logvar,
            "b_logvar": self.b_logvar,
            "w_state": self.w_state,
            "b_state": self.b_state,
            "dec.w": self.dec.w,
            "dec.b": self.dec.b,
            "w_out": self.w_out,
            "b_out": self.b_out,
            "artist_emb": self.artist_emb,
        }

    def trainable_params(self) -> list[Tensor]:
        return [t for t in self.named_params().values() if t.requires_grad]

    # -- encoder ------------------------------------------------------------

    def encode_batch(
        self, content: np.ndarray, lengths: np.ndarray
    ) -> tuple[Tensor, Tensor]:
        """content (B, T) PAD-padded content ids -> (mu, logvar), each (B, latent)."""
        b, t_max = content.shape
        if t_max == 0 or np.any(lengths < 1):
            raise ValueError("cannot encode a line with empty content")
        h_f, c_f = self.enc_fwd.zeros_state(b)
        h_b, c_b = self.enc_bwd.zeros_state(b)
        for t in range(t_max):
            mask = Tensor((t < lengths).astype(np.float64)[:, None])
            keep = Tensor(1.0 - mask.data)
            x = ad.embedding_lookup(self.word_emb, content[:, t])
            h_new, c_new = self.enc_fwd.step(x, h_f, c_f)
            h_f = ad.add(ad.mul(h_new, mask), ad.mul(h_f, keep))
            c_f = ad.add(ad.mul(c_new, mask), ad.mul(c_f, keep))
        for t in range(t_max - 1, -1, -1):
            mask = Tensor((t < lengths).astype(np.float64)[:, None])
            keep = Tensor(1.0 - mask.data)
            x = ad.embedding_lookup(self.word_emb, content[:, t])
            h_new, c_new = self.enc_bwd.step(x, h_b, c_b)
            h_b = ad.add(ad.mul(h_new, mask), ad.mul(h_b, keep))
            c_b = ad.add(ad.mul(c_new, mask), ad.mul(c_b, keep))
        h_cat = ad.concat([h_f, h_b])
        mu = dense(h_cat, self.w_mu, self.b_mu)
        logvar = dense(h_cat, self.w_logvar, self.b_logvar)
        return mu, logvar

    def encode(self, line: EncodedLine) -> tuple[np.ndarray, np.ndarray]:
        """Posterior parameters for one line (inference mode)."""
        content = line.content[None, :]
        with ad.no_grad():
            mu, logvar = self.encode_batch(content, np.array([line.length]))
        return mu.data[0], logvar.data[0]

    # -- decoder ------------------------------------------------------------

    def initial_state(self, z: Tensor) -> tuple[Tensor, Tensor]:
        d = self.config.decoder_hidden
        hc = dense(z, self.w_state, self.b_state)
        return ad.slice_last(hc, 0, d), ad.slice_last(hc, d, 2 * d)

    def decode_step(
        self, prev_ids: np.ndarray, artist_idx: np.ndarray, h: Tensor, c: Tensor
    ) -> tuple[Tensor, Tensor, Tensor]:
        """One teacher-forced step for a batch; returns (logits, h, c)."""
        x = ad.concat(
            [
                ad.embedding_lookup(self.word_emb, prev_ids),
                ad.embedding_lookup(self.artist_emb, artist_idx),
            ]
        )
        h, c = self.dec.step(x, h, c)
        return dense(h, self.w_out, self.b_out), h, c

    def decode_logits(
        self, z: Tensor, artist_idx: np.ndarray, inputs: np.ndarray
    ) -> list[Tensor]:
        """Teacher-forced logits, one (B, V) tensor per input position."""
        if np.any(artist_idx < 0) or np.any(artist_idx >= self.n_artists):
            raise ValueError(f"artist index out of range [0,{self.n_artists})")
        h, c = self.initial_state(z)
        logits = []
        for t in range(inputs.shape[1]):
            step_logits, h, c = self.decode_step(inputs[:, t], artist_idx, h, c)
            logits.append(step_logits)
        return logits


def decode_teacher_forced(
    model: VaeModel, z: np.ndarray, artist: int, inputs: np.ndarray
) -> np.ndarray:
    """Logits (T, V) for one line given latent z and dropped-out inputs."""
    z_t = Tensor(np.asarray(z, dtype=np.float64)[None, :])
    with ad.no_grad():
        logits = model.decode_logits(
            z_t, np.array([artist]), np.asarray(inputs, dtype=np.int64)[None, :]
        )
    return np.stack([l.data[0] for l in logits])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass
class StepStats:
    recon_nll: float  # per line (tokens summed)
    recon_nll_per_token: float
    kl: float  # per line
    kl_coeff: float
    total_loss: float
    n_tokens: int


def batch_arrays(
    batch: list[EncodedLine],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pad a batch: content ids, lengths, artist indices, targets, target mask.

    Targets cover the content shifted left plus the terminal EOS, so the
    decoder consumes length+1 positions per line.
    """
    b = len(batch)
    lengths = np.array([line.length for line in batch], dtype=np.int64)
    t_in = int(lengths.max()) + 1
    content = np.full((b, int(lengths.max())), PAD, dtype=np.int64)
    targets = np.full((b, t_in), PAD, dtype=np.int64)
    mask = np.zeros((b, t_in), dtype=np.float64)
    artist_idx = np.array([line.artist.index for line in batch], dtype=np.int64)
    for i, line in enumerate(batch):
        content[i, : line.length] = line.content
        targets[i, : line.length] = line.content
        targets[i, line.length] = EOS
        mask[i, : line.length + 1] = 1.0
    return content, lengths, artist_idx, targets, mask


def vae_loss(
    model: VaeModel,
    batch: list[EncodedLine],
    step: int,
    eps: np.ndarray,
    dropout_rng: np.random.Generator,
) -> tuple[Tensor, StepStats]:
    """Build the annealed negative ELBO for one batch on the tape."""
    content, lengths, artist_idx, targets, mask = batch_arrays(batch)
    b, t_in = targets.shape

    mu, logvar = model.encode_batch(content, lengths)
    z = ad.add(mu, ad.mul(ad.exp(ad.mul(logvar, Tensor(0.5))), Tensor(eps)))

    dec_in = np.concatenate(
        [np.full((b, 1), BOS, dtype=np.int64), content], axis=1
    )
    dec_in = word_dropout(dec_in, model.config.word_dropout, dropout_rng)
    logits = model.decode_logits(z, artist_idx, dec_in)

    stacked = ad.concat(logits, axis=0)  # rows ordered t-major: (t, b)
    flat_targets = targets.T.reshape(-1)
    flat_weights = mask.T.reshape(-1) / b
    recon = ad.softmax_cross_entropy(stacked, flat_targets, weights=flat_weights)

    pen = ad.sub(ad.add(ad.mul(mu, mu), ad.exp(logvar)), Tensor(1.0))
    kl = ad.mul(ad.sub(pen, logvar).sum(), Tensor(0.5 / b))

    coeff = kl_weight(step, model.config.schedule)
    total = recon if coeff == 0.0 else ad.add(recon, ad.mul(kl, Tensor(coeff)))

    n_tokens = int(mask.sum())
    stats = StepStats(
        recon_nll=recon.item(),
        recon_nll_per_token=recon.item() * b / n_tokens,
        kl=kl.item(),
        kl_coeff=coeff,
        total_loss=total.item(),
        n_tokens=n_tokens,
    )
    return total, stats


def training_step(
    model: VaeModel,
    batch: list[EncodedLine],
    optimizer: ad.Adam,
    step: int,
    rng: np.random.Generator,
) -> StepStats:
    """One annealed-ELBO gradient step; frozen modes never touch artist rows."""
    eps = rng.standard_normal((len(batch), model.config.latent_dim))
    optimizer.zero_grad()
    total, stats = vae_loss(model, batch, step, eps, rng)
    ad.backward(total)
    optimizer.step()
    return stats


@dataclass
class TrainHistory:
    steps: int
    step0: StepStats | None = None
    log: list[tuple[int, StepStats]] = field(default_factory=list)


def train_vae(
    vocab: Vocabulary,
    artists: list[ArtistId],
    train_lines: list[EncodedLine],
    config: VaeConfig,
    mode: str,
    steps: int,
    batch_size: int = 16,
    lr: float = 1e-3,
    seed: int = 0,
    artist_embeddings: ArtistEmbeddingMatrix | None = None,
    word_embeddings: np.ndarray | None = None,
    log_every: int = 100,
) -> tuple[VaeModel, TrainHistory]:
    children = np.random.SeedSequence(seed).spawn(3)
    model = VaeModel(
        vocab,
        artists,
        config,
        mode,
        seed=int(children[0].generate_state(1)[0]),
        artist_embeddings=artist_embeddings,
    )
    if word_embeddings is not None:
        if word_embeddings.shape != model.word_emb.shape:
            raise ValueError(
                f"word embedding table {word_embeddings.shape} does not match "
                f"(V, dim) = {model.word_emb.shape}"
            )
        model.word_emb.data = np.array(word_embeddings, dtype=np.float64)
    step_rng = np.random.default_rng(children[1])
    batch_rng = np.random.default_rng(children[2])
    opt = ad.Adam(model.trainable_params(), lr=lr)
    history = TrainHistory(steps=steps)
    order: list[int] = []
    for step in range(steps):
        if len(order) < batch_size:
            order = list(batch_rng.permutation(len(train_lines)))
        idx, order = order[:batch_size], order[batch_size:]
        batch = [train_lines[i] for i in idx]
        stats = training_step(model, batch, opt, step, step_rng)
        if step == 0:
            history.step0 = stats
        if step % log_every == 0 or step == steps - 1:
            history.log.append((step, stats))
    return model, history


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate(
    model: VaeModel,
    artist: int,
    n: int,
    temperature: float = 1.0,
    max_len: int | None = None,
    seed: int = 0,
) -> list[str]:
    """Sample n lines from the prior, conditioned on one artist.

    Temperature 0 decodes greedily; otherwise tokens are sampled from
    softmax(logits / temperature). Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if not 0 <= artist < model.n_artists:
        raise ValueError(f"invalid artist index {artist}")
    max_len = model.config.max_decode_len if max_len is None else max_len
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.config.latent_dim))
    artist_idx = np.full(n, artist, dtype=np.int64)

    with ad.no_grad():
        h, c = model.initial_state(Tensor(z))
        prev = np.full(n, BOS, dtype=np.int64)
        done = np.zeros(n, dtype=bool)
        rows: list[list[int]] = [[] for _ in range(n)]
        for _ in range(max_len):
            logits_t, h, c = model.decode_step(prev, artist_idx, h, c)
            scores = logits_t.data.copy()
            scores[:, PAD] = -np.inf
            scores[:, BOS] = -np.inf
            if temperature == 0.0:
                nxt = scores.argmax(axis=1)
            else:
                nxt = np.empty(n, dtype=np.int64)
                shifted = scores / temperature
                shifted -= shifted.max(axis=1, keepdims=True)
                probs = np.exp(shifted)
                probs /= probs.sum(axis=1, keepdims=True)
                for i in range(n):
                    if not done[i]:
                        nxt[i] = rng.choice(len(probs[i]), p=probs[i])
                    else:
                        nxt[i] = EOS
            for i in range(n):
                if done[i]:
                    continue
                if nxt[i] == EOS:
                    done[i] = True
                else:
                    rows[i].append(int(nxt[i]))
            if done.all():
                break
            prev = np.where(done, EOS, nxt)
    return [decode_ids(ids, model.vocab) for ids in rows]


def load_word_embeddings(
    path, vocab: Vocabulary, dim: int, seed: int = 0
) -> np.ndarray:
    """Seeded random table with rows overwritten from a text embedding file.

    File format: one token followed by `dim` decimals per line,
    whitespace-separated.
    """
    rng = np.random.default_rng(seed)
    table = rng.normal(scale=0.1, size=(vocab.size, dim))
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            parts = raw.rstrip("\n").split()
            if len(parts) != dim + 1:
                continue
            idx = vocab.id_of.get(parts[0])
            if idx is not None:
                table[idx] = [float(v) for v in parts[1:]]
    return table
