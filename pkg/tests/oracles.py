"""Independent naive reference implementations used to cross-check the library.

Everything here recomputes results from first principles (per-pair chain
walks, scalar loops) and deliberately shares no logic with the package.
"""

import math

import numpy as np

from sia.masks import SpecialToken


# --- tree statistics ---------------------------------------------------------


def walk_ancestors(heads, i):
    """Ancestor indices of 1-based token i by following parent links; heads[j-1] is j's head."""
    out = set()
    h = heads[i - 1]
    while h != 0:
        out.add(h)
        h = heads[h - 1]
    return out


def walk_depth(heads, i):
    d = 1
    h = heads[i - 1]
    while h != 0:
        d += 1
        h = heads[h - 1]
    return d


# --- masks -------------------------------------------------------------------


def naive_masks(seq, m, special_mode="open"):
    """Recompute intra/inter/sia masks per pair, walking head chains each time."""
    n = seq.n
    heads = [[tok.head for tok in t.tokens] for t in seq.utterances]
    kinds = {}
    for kind in ("intra", "inter", "sia"):
        cells = np.zeros((n, n), dtype=bool)
        for i in range(n):
            pi = seq.positions[i]
            for j in range(n):
                pj = seq.positions[j]
                if isinstance(pi, SpecialToken) or isinstance(pj, SpecialToken):
                    if special_mode == "open":
                        cells[i, j] = True
                    else:
                        cells[i, j] = i == j
                    continue
                intra = (
                    pi.utterance == pj.utterance
                    and (i == j or pj.index in walk_ancestors(heads[pi.utterance - 1], pi.index))
                )
                inter = (
                    walk_depth(heads[pi.utterance - 1], pi.index)
                    + walk_depth(heads[pj.utterance - 1], pj.index)
                    <= m
                )
                if kind == "intra":
                    cells[i, j] = intra
                elif kind == "inter":
                    cells[i, j] = inter
                else:
                    cells[i, j] = intra or inter
        kinds[kind] = cells
    return kinds


# --- attention ---------------------------------------------------------------


def scalar_softmax(row):
    top = max(row)
    exps = [math.exp(v - top) for v in row]
    total = sum(exps)
    return [e / total for e in exps]


def scalar_attention(Q, K, V, cells, mode, head_dim):
    """Pure-python attention; returns (output rows, weight rows)."""
    n = len(Q)
    scale = 1.0 / math.sqrt(head_dim)
    weights = []
    for i in range(n):
        logits = []
        for j in range(n):
            dot = sum(Q[i][t] * K[j][t] for t in range(head_dim))
            if mode == "additive":
                logits.append(dot * scale + (0.0 if cells[i][j] else -1.0e9))
            elif mode == "multiplicative":
                logits.append(dot * (1.0 if cells[i][j] else 0.0) * scale)
            else:
                logits.append(dot * scale)
        weights.append(scalar_softmax(logits))
    out = []
    for i in range(n):
        row = []
        for t in range(len(V[0])):
            row.append(sum(weights[i][j] * V[j][t] for j in range(n)))
        out.append(row)
    return out, weights


def scalar_multi_head(X, wq, wk, wv, wo, cells, mode):
    """Triple-loop multi-head attention; wq/wk/wv are per-head weight lists."""
    n, d = len(X), len(X[0])
    heads = len(wq)
    dh = len(wq[0][0])

    def project(w):
        return [[sum(X[i][c] * w[c][t] for c in range(d)) for t in range(dh)] for i in range(n)]

    concat = [[] for _ in range(n)]
    for h in range(heads):
        out, _ = scalar_attention(project(wq[h]), project(wk[h]), project(wv[h]), cells, mode, dh)
        for i in range(n):
            concat[i].extend(out[i])
    return [[sum(concat[i][c] * wo[c][t] for c in range(d)) for t in range(d)] for i in range(n)]


def scalar_layer_norm(X, gain, bias, eps=1e-5):
    out = []
    for row in X:
        d = len(row)
        mu = sum(row) / d
        var = sum((v - mu) ** 2 for v in row) / d
        inv = 1.0 / math.sqrt(var + eps)
        out.append([(v - mu) * inv * gain[t] + bias[t] for t, v in enumerate(row)])
    return out


def scalar_encoder_layer(X, layer, cells, mode):
    attn = scalar_multi_head(X, layer["wq"], layer["wk"], layer["wv"], layer["wo"], cells, mode)
    summed = [[X[i][t] + attn[i][t] for t in range(len(X[0]))] for i in range(len(X))]
    return scalar_layer_norm(summed, layer["ln_gain"], layer["ln_bias"])


def scalar_sia_block(X, layers, out_proj, cells, mode):
    x = X
    for layer in layers:
        x = scalar_encoder_layer(x, layer, cells, mode)
    d = len(out_proj)
    return [[sum(x[i][c] * out_proj[c][t] for c in range(d)) for t in range(d)] for i in range(len(x))]


def layer_to_dict(layer):
    """Convert an EncoderLayerParams of numpy arrays into plain lists for the oracles."""
    return {
        "wq": [w.tolist() for w in layer.mha.wq],
        "wk": [w.tolist() for w in layer.mha.wk],
        "wv": [w.tolist() for w in layer.mha.wv],
        "wo": layer.mha.wo.tolist(),
        "ln_gain": layer.ln_gain.tolist(),
        "ln_bias": layer.ln_bias.tolist(),
    }


# --- full model forward (independent numpy path) ------------------------------


def oracle_forward(example, params, cfg):
    """Recompute the matching score with plain scalar loops end to end."""
    from sia.masks import assemble, sia_mask
    seq = assemble(example)
    ids = []
    for pos in seq.positions:
        if isinstance(pos, SpecialToken):
            ids.append(params.vocab.special_id(pos.kind))
        else:
            ids.append(params.vocab.id_of(seq.tree(pos.utterance).token(pos.index).form))
    embed = params.embed.tolist()
    posemb = params.pos.tolist()
    x = [[embed[tok][t] + posemb[p][t] for t in range(cfg.dim)] for p, tok in enumerate(ids)]

    no_mask = [[True] * seq.n for _ in range(seq.n)]
    taps = []
    for layer in params.layers:
        x = scalar_encoder_layer(x, layer_to_dict(layer), no_mask, "none")
        taps.append(x)
    h = x
    if cfg.sia:
        cells = sia_mask(seq, cfg.m, cfg.special_mode).cells.tolist()
        h_sia = scalar_sia_block(
            taps[params.tap - 1],
            [layer_to_dict(l) for l in params.sia.layers],
            params.sia.out_proj.tolist(),
            cells,
            cfg.mask_mode,
        )
        h_prime = [[h[i][t] + h_sia[i][t] for t in range(cfg.dim)] for i in range(seq.n)]
    else:
        h_prime = h
    logit = sum(h_prime[0][t] * params.w_task[t] for t in range(cfg.dim)) + float(params.b_task)
    return 1.0 / (1.0 + math.exp(-logit))
