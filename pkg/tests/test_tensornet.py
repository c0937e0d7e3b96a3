import numpy as np
import pytest

from renas.tensornet import (
    CorruptFile,
    IoError,
    ShapeMismatch,
    StateMismatch,
    VersionMismatch,
    adam_step,
    backward,
    forward,
    forward_cache,
    init_adam,
    init_model,
    load,
    save,
)


def small_model(seed=0):
    return init_model(seed, conv_channels=(6, 8), dense_sizes=(10, 7))


def random_batch(rng, b, shape=(19, 7, 7)):
    return rng.standard_normal((b, *shape))


def naive_forward_one(model, x):
    """Straightforward loop re-implementation of the layer formulas."""
    act = x
    for i, c_out in enumerate(model.arch["conv"]):
        w = model.weights[f"conv{i}_w"]
        bias = model.weights[f"conv{i}_b"]
        c_in, h, wd = act.shape
        out = np.zeros((c_out, h, wd))
        for o in range(c_out):
            for y in range(h):
                for z in range(wd):
                    s = bias[o]
                    for c in range(c_in):
                        for dy in (-1, 0, 1):
                            for dz in (-1, 0, 1):
                                yy, zz = y + dy, z + dz
                                if 0 <= yy < h and 0 <= zz < wd:
                                    s += w[o, c, dy + 1, dz + 1] * act[c, yy, zz]
                    out[o, y, z] = max(s, 0.0)
        act = out
    vec = act.reshape(-1)
    n_dense = len(model.arch["dense"])
    embed = None
    for i in range(n_dense):
        w = model.weights[f"dense{i}_w"]
        bias = model.weights[f"dense{i}_b"]
        pre = w @ vec + bias
        if i == n_dense - 1:
            return pre[0], embed
        vec = np.maximum(pre, 0.0)
        if i == n_dense - 2:
            embed = vec


def scalar_loss(model, batch, a, b):
    """Fixed linear functional of the outputs, for finite differences."""
    scores, embeds = forward(model, batch)
    return float(a @ scores + (b * embeds).sum())


def fd_grad(model, batch, a, b, name, idx, h=1e-5):
    w = model.weights[name]
    old = w.flat[idx]
    w.flat[idx] = old + h
    hi = scalar_loss(model, batch, a, b)
    w.flat[idx] = old - h
    lo = scalar_loss(model, batch, a, b)
    w.flat[idx] = old
    return (hi - lo) / (2 * h)


def check_gradients(model, batch, rng, samples_per_layer=2, tol=1e-3):
    """Compare backward() against central finite differences."""
    bsz = batch.shape[0]
    a = rng.standard_normal(bsz)
    b = rng.standard_normal((bsz, model.embed_dim))
    scores, embeds, cache = forward_cache(model, batch)
    grads = backward(model, cache, a, b)
    checked = 0
    for name, w in model.weights.items():
        for _ in range(samples_per_layer):
            idx = int(rng.integers(w.size))
            want = fd_grad(model, batch, a, b, name, idx)
            got = grads[name].flat[idx]
            rel = abs(got - want) / max(abs(want), 1e-8)
            assert rel < tol, f"{name}[{idx}]: analytic {got}, fd {want}"
            checked += 1
    return checked


def test_forward_matches_naive_loops():
    rng = np.random.default_rng(42)
    model = small_model()
    batch = random_batch(rng, 3)
    scores, embeds = forward(model, batch)
    for r in range(3):
        want_score, want_embed = naive_forward_one(model, batch[r])
        assert abs(scores[r] - want_score) <= 1e-6 * max(1.0, abs(want_score))
        np.testing.assert_allclose(embeds[r], want_embed, rtol=1e-6, atol=1e-12)


def test_zero_weight_model_outputs_zero():
    model = small_model()
    for w in model.weights.values():
        w[:] = 0.0
    scores, embeds = forward(model, random_batch(np.random.default_rng(1), 4))
    assert not scores.any() and not embeds.any()


def test_repeated_calls_are_bitwise_identical():
    model = small_model()
    batch = random_batch(np.random.default_rng(2), 6)
    s1, e1 = forward(model, batch)
    s2, e2 = forward(model, batch)
    assert s1.tobytes() == s2.tobytes()
    assert e1.tobytes() == e2.tobytes()


def test_duplicate_rows_and_batch_order():
    # per-row outputs are independent of batch composition up to the
    # last-ulp reduction-order wiggle of the underlying BLAS
    rng = np.random.default_rng(2)
    model = small_model()
    batch = random_batch(rng, 5)
    doubled = np.concatenate([batch, batch])
    s, e = forward(model, doubled)
    np.testing.assert_allclose(s[:5], s[5:], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(e[:5], e[5:], rtol=1e-12, atol=1e-15)
    base_s, base_e = forward(model, batch)
    perm = rng.permutation(5)
    s2, e2 = forward(model, batch[perm])
    np.testing.assert_allclose(s2, base_s[perm], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(e2, base_e[perm], rtol=1e-12, atol=1e-15)


def test_shape_checks():
    model = small_model()
    with pytest.raises(ShapeMismatch):
        forward(model, np.zeros((19, 7, 7)))
    with pytest.raises(ShapeMismatch):
        forward(model, np.zeros((2, 18, 7, 7)))


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    model = small_model(seed=3)
    batch = random_batch(rng, 6)
    assert check_gradients(model, batch, rng) == 2 * len(model.weights)


def test_default_arch_gradients():
    rng = np.random.default_rng(11)
    model = init_model(5)
    batch = random_batch(rng, 4)
    check_gradients(model, batch, rng, samples_per_layer=1)


def test_zero_upstream_gives_zero_grads():
    model = small_model()
    batch = random_batch(np.random.default_rng(3), 4)
    _, _, cache = forward_cache(model, batch)
    grads = backward(model, cache, np.zeros(4), np.zeros((4, model.embed_dim)))
    assert all(not g.any() for g in grads.values())


def test_batch_gradient_is_sum_of_rows():
    rng = np.random.default_rng(13)
    model = small_model()
    batch = random_batch(rng, 3)
    a = rng.standard_normal(3)
    _, _, cache = forward_cache(model, batch)
    whole = backward(model, cache, a)
    parts = {}
    for r in range(3):
        _, _, c_r = forward_cache(model, batch[r : r + 1])
        g_r = backward(model, c_r, a[r : r + 1])
        for name, g in g_r.items():
            parts[name] = parts.get(name, 0) + g
    for name in whole:
        np.testing.assert_allclose(whole[name], parts[name], rtol=1e-9, atol=1e-12)


def test_state_mismatch_guard():
    model_a = small_model(seed=1)
    model_b = small_model(seed=2)
    batch = random_batch(np.random.default_rng(4), 2)
    _, _, cache = forward_cache(model_a, batch)
    with pytest.raises(StateMismatch):
        backward(model_b, cache, np.zeros(2))
    with pytest.raises(ShapeMismatch):
        backward(model_a, cache, np.zeros(3))


def test_adam_first_step_closed_form():
    model = small_model(seed=9)
    state = init_adam(model, lr=1e-3, weight_decay=0.0)
    rng = np.random.default_rng(5)
    grads = {name: rng.standard_normal(w.shape) for name, w in model.weights.items()}
    before = {name: w.copy() for name, w in model.weights.items()}
    adam_step(model, grads, state)
    assert state.step == 1
    for name, w in model.weights.items():
        g = grads[name]
        want = before[name] - 1e-3 * g / (np.abs(g) + 1e-8)
        np.testing.assert_allclose(w, want, rtol=1e-12, atol=1e-15)


def test_adam_zero_grad_keeps_weights():
    model = small_model(seed=9)
    state = init_adam(model, weight_decay=0.0)
    before = {name: w.copy() for name, w in model.weights.items()}
    grads = {name: np.zeros_like(w) for name, w in model.weights.items()}
    adam_step(model, grads, state)
    for name, w in model.weights.items():
        np.testing.assert_array_equal(w, before[name])


def test_adam_shape_guard():
    model = small_model()
    state = init_adam(model)
    grads = {name: np.zeros_like(w) for name, w in model.weights.items()}
    grads["dense0_w"] = np.zeros(3)
    with pytest.raises(ShapeMismatch):
        adam_step(model, grads, state)


def test_init_is_deterministic():
    a = init_model(17)
    b = init_model(17)
    for name in a.weights:
        np.testing.assert_array_equal(a.weights[name], b.weights[name])
    c = init_model(18)
    assert any((a.weights[n] != c.weights[n]).any() for n in a.weights)


def test_save_load_round_trip(tmp_path):
    model = small_model(seed=21)
    p1 = tmp_path / "m1.json"
    p2 = tmp_path / "m2.json"
    save(model, str(p1))
    loaded = load(str(p1))
    save(loaded, str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    batch = random_batch(np.random.default_rng(6), 3)
    s1, e1 = forward(model, batch)
    s2, e2 = forward(loaded, batch)
    np.testing.assert_array_equal(s1, s2)
    np.testing.assert_array_equal(e1, e2)
    assert loaded.skeleton == model.skeleton
    assert loaded.seed == model.seed


def test_load_rejects_bad_files(tmp_path):
    model = small_model()
    p = tmp_path / "m.json"
    save(model, str(p))
    raw = p.read_text()

    truncated = tmp_path / "trunc.json"
    truncated.write_text(raw[: len(raw) // 2])
    with pytest.raises(CorruptFile):
        load(str(truncated))

    tampered = tmp_path / "tampered.json"
    tampered.write_text(raw.replace('"version":1', '"version":99'))
    with pytest.raises(VersionMismatch):
        load(str(tampered))

    flipped = tmp_path / "flipped.json"
    flipped.write_text(raw.replace('"seed":0', '"seed":1'))
    with pytest.raises(CorruptFile):
        load(str(flipped))

    not_ours = tmp_path / "other.json"
    not_ours.write_text('{"hello": "world"}')
    with pytest.raises(CorruptFile):
        load(str(not_ours))

    with pytest.raises(IoError):
        load(str(tmp_path / "missing.json"))
