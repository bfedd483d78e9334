"""Encoder-decoder composition, attention, decoding modes, checkpoints."""

import math

import numpy as np
import pytest

from seqduct import autodiff as ad
from seqduct import model as M
from seqduct import training as tr
from seqduct.autodiff import Rng, Tape, Tensor
from seqduct.errors import ContractError, DataError

V = M.DEFAULT_VOCAB


def small_model(variant="srnn", attention=False, hidden=4, embed=3, seed=0,
                vocab=None):
    rng = Rng(seed)
    return M.build_model(variant, attention, hidden, embed,
                         lambda s: rng.uniform(-0.5, 0.5, s), vocab=vocab)


def delimited(*words):
    return np.stack([V.encode_delimited(w) for w in words])


def targets_for(*words):
    return np.stack([np.concatenate((V.encode(w), [V.end_index])) for w in words])


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------


def test_vocabulary_size_and_bijection():
    assert V.size == 28
    indices = [V.encode(ch)[0] for ch in M.ALPHABET]
    assert sorted(indices) == list(range(26))
    assert V.start_index == 26 and V.end_index == 27


def test_vocabulary_round_trip_and_errors():
    assert V.decode(V.encode("hello")) == "hello"
    assert V.decode(V.encode_delimited("ab")) == "<s>ab</s>"
    with pytest.raises(DataError):
        V.encode("ab!")
    with pytest.raises(DataError):
        V.decode([99])
    with pytest.raises(ContractError):
        M.Vocabulary("aab")


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------


def test_encode_one_state_per_position():
    m = small_model()
    enc = M.encode(m, delimited("abc", "xyz"))
    assert len(enc.states) == 5  # <s> + 3 + </s>
    assert all(s.shape == (2, 4) for s in enc.states)
    assert enc.final.h is enc.states[-1] or np.array_equal(enc.final.h.data,
                                                           enc.states[-1].data)


def test_encode_zero_params_zero_states():
    m = M.build_model("srnn", False, 4, 3, lambda s: np.zeros(s))
    enc = M.encode(m, delimited("abc"))
    for s in enc.states:
        np.testing.assert_array_equal(s.data, np.zeros((1, 4)))


def test_encode_is_deterministic():
    m = small_model("gru")
    a = M.encode(m, delimited("abcdef"))
    b = M.encode(m, delimited("abcdef"))
    for s1, s2 in zip(a.states, b.states):
        np.testing.assert_array_equal(s1.data, s2.data)


def test_encode_rejects_out_of_vocabulary_index():
    m = small_model()
    bad = np.array([[26, 3, 99, 27]])
    with pytest.raises(IndexError):
        M.encode(m, bad)


# ---------------------------------------------------------------------------
# Attention
# ---------------------------------------------------------------------------


def test_attention_ops_require_attention_flag():
    m = small_model(attention=False)
    with pytest.raises(ContractError):
        M.attention_weights(m, np.zeros(4), np.zeros((3, 4)))
    with pytest.raises(ContractError):
        M.score(m, np.zeros(4), np.zeros(4))


def test_attention_weights_singleton_is_one():
    m = small_model(attention=True)
    w = M.attention_weights(m, np.ones(4), np.ones((1, 4)))
    np.testing.assert_allclose(w.data, [1.0], atol=1e-15)


def test_attention_weights_uniform_over_identical_states():
    m = small_model(attention=True, seed=3)
    h_enc = np.tile(np.array([0.3, -0.2, 0.1, 0.4]), (5, 1))
    w = M.attention_weights(m, np.array([0.5, 0.5, -0.5, 0.0]), h_enc)
    np.testing.assert_allclose(w.data, np.full(5, 0.2), atol=1e-12)


def test_attention_weights_hand_softmax():
    # D=1 model rigged so the scores come out [0, ln 3].
    m = small_model(attention=True, hidden=1, embed=1)
    m.attn_w.data[:] = [[0.0, 1.0]]  # score depends on h_enc only
    m.attn_v.data[:] = [[2.0]]
    h2 = np.arctanh(math.log(3.0) / 2.0)
    w = M.attention_weights(m, np.zeros(1), np.array([[0.0], [h2]]))
    np.testing.assert_allclose(w.data, [0.25, 0.75], atol=1e-12)


def test_attention_weights_normalized_on_random_model():
    m = small_model("lstm", attention=True, seed=8)
    rng = Rng(2)
    for _ in range(10):
        w = M.attention_weights(m, rng.uniform(-1, 1, 4), rng.uniform(-1, 1, (7, 4)))
        assert w.shape == (7,)
        assert np.all(w.data >= 0)
        assert abs(w.data.sum() - 1.0) < 1e-12


def test_score_zero_parameters():
    m = small_model(attention=True)
    m.attn_w.data[:] = 0.0
    assert M.score(m, np.ones(4), np.ones(4)) == 0.0
    m2 = small_model(attention=True, seed=5)
    m2.attn_v.data[:] = 0.0
    assert M.score(m2, np.ones(4), -np.ones(4)) == 0.0


def test_score_hand_case():
    m = small_model(attention=True, hidden=1, embed=1)
    m.attn_w.data[:] = [[1.0, 1.0]]
    m.attn_v.data[:] = [[2.0]]
    got = M.score(m, np.array([0.3]), np.array([0.2]))
    assert got == pytest.approx(2.0 * math.tanh(0.5), abs=1e-12)
    assert got == pytest.approx(0.92423431, abs=1e-8)


def test_context_vector_selector_and_average():
    h_enc = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    np.testing.assert_array_equal(
        M.context_vector(np.array([0.0, 1.0, 0.0]), h_enc).data, [0.0, 1.0])
    np.testing.assert_allclose(
        M.context_vector(np.full(3, 1 / 3), h_enc).data, h_enc.mean(axis=0))


def test_context_vector_hand_case():
    h_enc = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = M.context_vector(np.array([0.25, 0.75]), h_enc)
    np.testing.assert_allclose(out.data, [0.25, 0.75], atol=1e-15)
    with pytest.raises(ContractError):
        M.context_vector(np.array([0.5, 0.5, 0.0]), h_enc)


def test_attention_output_invariant_to_swapping_identical_states():
    m = small_model("gru", attention=True, seed=4)
    h_enc = Rng(6).uniform(-1, 1, (6, 4))
    h_enc[2] = h_enc[4]  # two identical encoder positions
    swapped = h_enc.copy()
    swapped[[2, 4]] = swapped[[4, 2]]
    h_dec = Rng(7).uniform(-1, 1, 4)
    a = M.context_vector(M.attention_weights(m, h_dec, h_enc).data, h_enc)
    b = M.context_vector(M.attention_weights(m, h_dec, swapped).data, swapped)
    np.testing.assert_allclose(a.data, b.data, atol=1e-12)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("attention", [False, True])
def test_teacher_forced_logit_shapes(attention):
    m = small_model("gru", attention=attention)
    enc = M.encode(m, delimited("abcd", "wxyz"))
    logits = M.decode_teacher_forced(m, enc, targets_for("abcd", "wxyz"))
    assert len(logits) == 5
    assert all(l.shape == (2, 28) for l in logits)


def test_teacher_forced_rejects_empty_target():
    m = small_model()
    enc = M.encode(m, delimited("ab"))
    with pytest.raises(ContractError):
        M.decode_teacher_forced(m, enc, np.zeros((1, 0), dtype=np.int64))


def test_random_init_loss_near_uniform_baseline():
    rng = Rng(42)
    m = M.build_model("gru", True, 16, 8, tr.make_initializer(rng))
    words = ["abcdef", "qwerty", "zzzzzz", "poiuyt"]
    loss = tr.teacher_forced_loss(m, delimited(*words), targets_for(*words))
    assert abs(float(loss.data) - math.log(28.0)) < 0.5


def test_decode_fixed_length_contract():
    m = small_model("lstm", attention=True)
    enc = M.encode(m, delimited("abc"))
    out = M.decode_fixed_length(m, enc, 9)
    assert out.shape == (1, 9)
    with pytest.raises(ContractError):
        M.decode_fixed_length(m, enc, 0)


def test_output_bias_can_force_constant_end_symbol():
    m = small_model()
    m.out_b.data[:] = 0.0
    m.out_b.data[V.end_index] = 50.0
    m.out_w.data[:] = 0.0
    enc = M.encode(m, delimited("abc"))
    out = M.decode_fixed_length(m, enc, 6)
    assert np.all(out == V.end_index)


def test_overfit_pair_reproduced_greedily():
    """Once teacher-forced argmaxes hit the target, greedy decoding must too."""
    word = "dcba"
    inputs, targets = delimited(word), targets_for(word)
    rng = Rng(1)
    m = M.build_model("gru", False, 24, 8, tr.make_initializer(rng))
    tensors = [t for _, t in m.parameters()]
    adam = tr.AdamState(tensors)
    for step in range(400):
        with Tape() as tape:
            loss = tr.teacher_forced_loss(m, inputs, targets)
        ad.zero_grads(tensors)
        ad.backward(tape, loss)
        grads = [t.grad for t in tensors]
        tr.clip_global_norm(grads, 1.0)
        tr.adam_step(tensors, grads, adam, 1e-2, 0.0)
        logits = M.decode_teacher_forced(m, M.encode(m, inputs), targets)
        if all(int(l.data.argmax(axis=1)[0]) == targets[0, t]
               for t, l in enumerate(logits)):
            break
    else:
        pytest.fail("tiny model failed to overfit one pair")
    greedy = M.decode_fixed_length(m, M.encode(m, inputs), targets.shape[1])
    np.testing.assert_array_equal(greedy, targets)


# ---------------------------------------------------------------------------
# Tagger
# ---------------------------------------------------------------------------


def test_tagger_output_length_matches_input():
    rng = Rng(3)
    m = M.build_tagger("srnn", 4, 3, tr.make_initializer(rng))
    idx = np.stack([V.encode("abcde"), V.encode("vwxyz")])
    out = M.tagger_forward(m, idx)
    assert out.shape == idx.shape


def test_tagger_zero_params_constant_output():
    m = M.build_tagger("gru", 4, 3, lambda s: np.zeros(s))
    m.out_b.data[:] = 0.0
    m.out_b.data[17] = 1.0
    out = M.tagger_forward(m, np.stack([V.encode("abc")]))
    assert np.all(out == 17)


# ---------------------------------------------------------------------------
# Parameter counting
# ---------------------------------------------------------------------------


def test_count_parameters_hand_case():
    # D=1, E=1, two-symbol vocabulary: 2+2 embeddings, 3+3 cells, 2+2 output.
    tiny_vocab = M.Vocabulary("")
    m = M.build_model("srnn", False, 1, 1, lambda s: np.zeros(s), vocab=tiny_vocab)
    assert M.count_parameters(m) == 14


def test_count_parameters_linear_in_vocab_size():
    d, e = 5, 4
    small = M.build_model("gru", False, d, e, lambda s: np.zeros(s),
                          vocab=M.Vocabulary("abc"))
    big = M.build_model("gru", False, d, e, lambda s: np.zeros(s),
                        vocab=M.Vocabulary("abcdefgh"))
    delta_v = big.vocab.size - small.vocab.size
    expected = 2 * e * delta_v + delta_v * (d + 1)
    assert M.count_parameters(big) - M.count_parameters(small) == expected


@pytest.mark.parametrize("variant", ["srnn", "gru", "lstm"])
def test_attention_adds_exactly_its_own_parameters(variant):
    d, e = 6, 3
    plain = M.build_model(variant, False, d, e, lambda s: np.zeros(s))
    attn = M.build_model(variant, True, d, e, lambda s: np.zeros(s))
    # the attention block itself, plus the wider decoder input (E+D vs E)
    gates = {"srnn": 1, "lstm": 4, "gru": 3}[variant]
    extra = (2 * d * d + d) + gates * d * d
    assert M.count_parameters(attn) - M.count_parameters(plain) == extra


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def test_checkpoint_round_trip_bit_exact(tmp_path):
    m = small_model("lstm", attention=True, hidden=5, embed=4, seed=11)
    path = tmp_path / "model.npz"
    M.save_checkpoint(path, m, seed=77, metadata={"task": "reversal", "run": 1})
    loaded, seed, meta = M.load_checkpoint(path)
    assert seed == 77
    assert meta == {"task": "reversal", "run": 1}
    assert loaded.variant == "lstm" and loaded.attention
    original = dict(m.parameters())
    for name, tensor in loaded.parameters():
        np.testing.assert_array_equal(tensor.data, original[name].data)


def test_checkpoint_round_trip_tagger(tmp_path):
    rng = Rng(5)
    m = M.build_tagger("gru", 4, 3, tr.make_initializer(rng))
    path = tmp_path / "tagger.npz"
    M.save_checkpoint(path, m, seed=1)
    loaded, _, _ = M.load_checkpoint(path)
    assert isinstance(loaded, M.TaggerModel)
    for (name, got), (_, want) in zip(loaded.parameters(), m.parameters()):
        np.testing.assert_array_equal(got.data, want.data)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.npz"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(DataError):
        M.load_checkpoint(path)


def test_checkpoint_rejects_missing_header(tmp_path):
    path = tmp_path / "plain.npz"
    np.savez(path, a=np.zeros(3))
    with pytest.raises(DataError):
        M.load_checkpoint(path)
