"""Independent reference for the tiny transformer.

Reads a TTAW weight file and a vocabulary with numpy only, tokenizes a fixed
input with its own greedy longest-match encoder and runs the whole sequence
through a dense (non-cached) causal forward pass. The resulting logits are
stored as the golden file the C++ tests compare against.

    python3 scripts/reference_forward.py [--repo .]
"""

import argparse
import json
import struct
from pathlib import Path

import numpy as np

TEXT = '```\nclick [3]\n```\ntype [2] [Paris] [1]'
EPS = 1e-5


def load_ttaw(path):
    raw = Path(path).read_bytes()
    assert raw[:4] == b"TTAW"
    (hlen,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8 : 8 + hlen])
    off = 8 + hlen
    tensors = {}
    for t in header["tensors"]:
        n = int(np.prod(t["shape"]))
        tensors[t["name"]] = np.frombuffer(raw, "<f8", n, off).reshape(t["shape"])
        off += 8 * n
    assert off == len(raw)
    return header, tensors


def load_vocab(path):
    out = []
    for line in Path(path).read_text(encoding="utf-8").split("\n")[:-1]:
        tok, i = "", 0
        while i < len(line):
            if line[i] == "\\" and i + 1 < len(line):
                tok += {"n": "\n", "t": "\t", "r": "\r", "\\": "\\"}[line[i + 1]]
                i += 2
            else:
                tok += line[i]
                i += 1
        out.append(tok)
    return out


def encode(text, vocab):
    index = {t: i for i, t in enumerate(vocab) if i >= 3}
    longest = max(len(t) for t in index)
    ids, pos = [], 0
    while pos < len(text):
        for n in range(min(longest, len(text) - pos), 0, -1):
            if text[pos : pos + n] in index:
                ids.append(index[text[pos : pos + n]])
                pos += n
                break
        else:
            ids.append(0)
            pos += 1
    return ids


def layer_norm(x, g, b):
    mu = x.mean(-1, keepdims=True)
    var = ((x - mu) ** 2).mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(var + EPS) * g + b


def gelu(x):
    return 0.5 * x * (1 + np.tanh(np.sqrt(2 / np.pi) * (x + 0.044715 * x**3)))


def forward(header, w, ids):
    n, d, heads = len(ids), header["d"], header["heads"]
    hd = d // heads
    x = w["tok_embedding"][ids] + w["pos_embedding"][:n]
    mask = np.triu(np.full((n, n), -np.inf), 1)
    for layer in range(header["layers"]):
        p = f"blocks.{layer}."
        h = layer_norm(x, w[p + "ln1.gain"], w[p + "ln1.bias"])
        q = h @ w[p + "attn.wq"].T + w[p + "attn.bq"]
        k = h @ w[p + "attn.wk"].T + w[p + "attn.bk"]
        v = h @ w[p + "attn.wv"].T + w[p + "attn.bv"]
        out = np.zeros_like(q)
        for i in range(heads):
            s = slice(i * hd, (i + 1) * hd)
            a = q[:, s] @ k[:, s].T / np.sqrt(hd) + mask
            a = np.exp(a - a.max(-1, keepdims=True))
            out[:, s] = (a / a.sum(-1, keepdims=True)) @ v[:, s]
        x = x + out @ w[p + "attn.wo"].T + w[p + "attn.bo"]
        h = layer_norm(x, w[p + "ln2.gain"], w[p + "ln2.bias"])
        x = x + gelu(h @ w[p + "mlp.w_up"].T + w[p + "mlp.b_up"]) @ w[p + "mlp.w_down"].T + w[p + "mlp.b_down"]
    hidden = layer_norm(x, w["final_norm.gain"], w["final_norm.bias"])
    return hidden @ w["output_projection"].T


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repo", default=".")
    args = ap.parse_args()
    repo = Path(args.repo)
    header, w = load_ttaw(repo / "data/model/tiny.ttaw")
    vocab = load_vocab(repo / "data/model/tiny.vocab")
    ids = [1] + encode(TEXT, vocab)
    logits = forward(header, w, ids)
    out = {"text": TEXT, "ids": ids, "logits": [[float(v) for v in row] for row in logits]}
    (repo / "data/golden").mkdir(parents=True, exist_ok=True)
    (repo / "data/golden/forward_logits.json").write_text(json.dumps(out) + "\n")
    print(f"wrote {len(ids)} x {logits.shape[1]} logits")


if __name__ == "__main__":
    main()
