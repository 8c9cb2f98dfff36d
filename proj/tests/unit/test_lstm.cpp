#include <doctest.h>

#include <cmath>
#include <random>

#include "mmvdn/lstm.hpp"
#include "mmvdn/training.hpp"
#include "oracles.hpp"

using namespace mmvdn;

namespace {

std::vector<double> to_double(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Vocabulary toy_vocab() {
  std::vector<std::vector<std::string>> caps{tokenize("a red square is moving"), tokenize("a blue circle is fading")};
  return Vocabulary::build(caps);
}

}  // namespace

TEST_SUITE("seq2seq-lstm") {
  TEST_CASE("vocabulary conventions") {
    const Vocabulary v = toy_vocab();
    CHECK(v.token(kPad) == "<pad>");
    CHECK(v.token(kBos) == "<bos>");
    CHECK(v.token(kEos) == "<eos>");
    CHECK(v.token(kUnk) == "<unk>");
    CHECK(v.size() == 4 + 8);
    CHECK(v.index("square") == 6);
    CHECK(v.index("triangle") == kUnk);
    for (int i = 0; i < v.size(); ++i) CHECK(v.index(v.token(i)) == i);
    CHECK(Vocabulary::parse(v.serialize()) == v);
    CHECK_THROWS_AS(Vocabulary::parse("<bos>\n<pad>\n<eos>\n<unk>\n"), std::invalid_argument);
    std::vector<std::vector<std::string>> reserved{{"<eos>"}};
    CHECK_THROWS_AS(Vocabulary::build(reserved), std::invalid_argument);
    CHECK(tokenize("a red square is sliding").size() == 5);
  }

  TEST_CASE("caption sequences") {
    const Vocabulary v = toy_vocab();
    const CaptionSequence s = CaptionSequence::encode(v, "a red square is moving");
    CHECK(s.tokens.front() == kBos);
    CHECK(s.tokens.back() == kEos);
    CHECK(s.tokens.size() == 7);
    CHECK(s.text(v) == "a red square is moving");
    CHECK_THROWS_AS((CaptionSequence{{kBos, kEos, 5, kEos}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((CaptionSequence{{kBos, kPad, kEos}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((CaptionSequence{{kBos}}.validate()), std::invalid_argument);
  }

  TEST_CASE("cell: zeros, saturation and the 64-bit reference") {
    Tape tape;
    LstmState zero{tape.constant(Tensor({3})), tape.constant(Tensor({3}))};
    LstmState z = lstm_cell_step(tape.constant(Tensor({12, 5})), tape.constant(Tensor({12})),
                                 tape.constant(Tensor({2})), zero);
    for (float v : z.h.value().data()) CHECK(v == 0.f);
    for (float v : z.c.value().data()) CHECK(v == 0.f);

    Tensor bias({12}, 0.f);
    for (int j = 0; j < 3; ++j) {
      bias[static_cast<std::size_t>(j)] = -1000.f;     // input gate closed
      bias[static_cast<std::size_t>(3 + j)] = 1000.f;  // forget gate open
    }
    LstmState prev{tape.constant(Tensor({3}, 0.3f)), tape.constant(Tensor({3}, {0.5f, -0.2f, 0.9f}))};
    std::mt19937_64 rng(1);
    LstmState keep = lstm_cell_step(tape.constant(oracle::random_tensor({12, 5}, rng)), tape.constant(bias),
                                    tape.constant(oracle::random_tensor({2}, rng)), prev);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(keep.c.value()[j] - prev.c.value()[j]) <= 1e-6);

    CHECK_THROWS_AS(lstm_cell_step(tape.constant(Tensor({12, 4})), tape.constant(Tensor({12})),
                                   tape.constant(Tensor({2})), zero),
                    std::invalid_argument);

    for (int trial = 0; trial < 30; ++trial) {
      const Tensor w = oracle::random_tensor({16, 7}, rng), b = oracle::random_tensor({16}, rng);
      const Tensor x = oracle::random_tensor({3}, rng), h = oracle::random_tensor({4}, rng), c = oracle::random_tensor({4}, rng);
      LstmState out = lstm_cell_step(tape.constant(w), tape.constant(b), tape.constant(x), {tape.constant(h), tape.constant(c)});
      std::vector<double> rh, rc;
      oracle::lstm_cell(w, b, to_double(x), to_double(h), to_double(c), rh, rc);
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(out.h.value()[j] - rh[j]) <= 1e-5);
        CHECK(std::abs(out.c.value()[j] - rc[j]) <= 1e-5);
      }
    }
  }

  TEST_CASE("encoder: single step, order sensitivity, zero input recurrence") {
    ParameterSet params;
    add_captioner_params(params, {5, 6, 3, 12}, 4);
    Tape tape;
    CaptionerVars p = bind_captioner(tape, params);
    std::mt19937_64 rng(2);
    const Var v1 = tape.constant(oracle::random_tensor({5}, rng, -3.f, 3.f));
    const Var v2 = tape.constant(oracle::random_tensor({5}, rng, -3.f, 3.f));

    const Var one[] = {v1};
    EncoderState s = encode(p, one);
    LstmState z{tape.constant(Tensor({6})), tape.constant(Tensor({6}))};
    LstmState l1 = lstm_cell_step(p.lstm1_w, p.lstm1_b, v1, z);
    const Var in2[] = {l1.h, tape.constant(Tensor({3}))};
    LstmState l2 = lstm_cell_step(p.lstm2_w, p.lstm2_b, concat(in2), z);
    CHECK(s.layer1.h.value() == l1.h.value());
    CHECK(s.layer2.c.value() == l2.c.value());

    const Var fwd[] = {v1, v2}, rev[] = {v2, v1};
    CHECK_FALSE(encode(p, fwd).layer2.h.value() == encode(p, rev).layer2.h.value());

    const Var zv = tape.constant(Tensor({5}));
    const Var zeros[] = {zv, zv, zv};
    EncoderState e = encode(p, zeros);
    LstmState a = z, b = z;
    for (int t = 0; t < 3; ++t) {
      a = lstm_cell_step(p.lstm1_w, p.lstm1_b, zv, a);
      const Var i2[] = {a.h, tape.constant(Tensor({3}))};
      b = lstm_cell_step(p.lstm2_w, p.lstm2_b, concat(i2), b);
    }
    CHECK(e.layer2.h.value() == b.h.value());
    CHECK_THROWS_AS(encode(p, std::span<const Var>{}), std::invalid_argument);
  }

  TEST_CASE("teacher forcing: uniform case, factorisation, softmax normalisation") {
    ParameterSet params;
    add_captioner_params(params, {2, 3, 2, 4}, 1);
    for (const char* n : {"out.weight", "out.bias"}) params.get(n).value.fill(0.f);
    Tape tape;
    CaptionerVars p = bind_captioner(tape, params);
    const Var v[] = {tape.constant(Tensor({2}, 0.5f))};
    TeacherForcedResult r = decode_teacher_forced(p, encode(p, v), CaptionSequence{{kBos, kEos}});
    CHECK(r.step_nll.size() == 1);
    CHECK(r.loss.value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-6));

    ParameterSet big;
    add_captioner_params(big, {3, 5, 4, 9}, 2);
    Tape t2;
    CaptionerVars q = bind_captioner(t2, big);
    std::mt19937_64 rng(3);
    const Var vs[] = {t2.constant(oracle::random_tensor({3}, rng)), t2.constant(oracle::random_tensor({3}, rng))};
    const CaptionSequence gold{{kBos, 5, 7, 4, kEos}};
    TeacherForcedResult tf = decode_teacher_forced(q, encode(q, vs), gold);
    CHECK(tf.step_nll.size() == 4);
    double total = 0;
    for (std::size_t i = 0; i < tf.logits.size(); ++i) {
      const Tensor& l = tf.logits[i].value();
      const auto sm = softmax(l.data());
      double s = 0;
      for (float x : sm) s += x;
      CHECK(std::abs(s - 1.0) <= 1e-5);
      std::vector<double> ld(l.data().begin(), l.data().end());
      const double nll = oracle::softmax_xent(ld, gold.tokens[i + 1]);
      CHECK(std::abs(tf.step_nll[i].value()[0] - nll) <= 1e-5);
      total += nll;
    }
    CHECK(std::abs(tf.total_nll.value()[0] - total) <= 1e-4);
    CHECK(tf.loss.value()[0] == doctest::Approx(tf.total_nll.value()[0] / 4.0));
  }

  TEST_CASE("one gradient step lowers the loss") {
    ParameterSet params;
    add_captioner_params(params, {3, 8, 4, 8}, 5);
    const CaptionSequence gold{{kBos, 4, 6, kEos}};
    auto loss_now = [&](bool step) {
      params.zero_grad();
      Tape tape;
      CaptionerVars p = bind_captioner(tape, params);
      const Var v[] = {tape.constant(Tensor({3}, {0.2f, -0.1f, 0.4f}))};
      Var l = decode_teacher_forced(p, encode(p, v), gold).loss;
      const float value = l.value()[0];
      if (step) {
        tape.backward(l);
        Sgd(0.5, 0.0, 100.0).step(params);
      }
      return value;
    };
    const float before = loss_now(true);
    CHECK(loss_now(false) < before);
  }

  TEST_CASE("greedy decoding: forced EOS, determinism, masking") {
    ParameterSet params;
    add_captioner_params(params, {2, 3, 2, 6}, 7);
    params.get("out.weight").value.fill(0.f);
    Tensor& ob = params.get("out.bias").value;
    ob.fill(0.f);
    ob[kEos] = 10.f;
    ob[kPad] = 50.f;
    ob[kBos] = 50.f;
    Tape tape;
    CaptionerVars p = bind_captioner(tape, params);
    const Var v[] = {tape.constant(Tensor({2}, 1.f))};
    const EncoderState s = encode(p, v);
    CHECK(decode_greedy(p, s, 5).tokens == std::vector<int>{kBos, kEos});
    ob[kEos] = -10.f;
    ob[5] = 3.f;
    Tape t2;
    CaptionerVars q = bind_captioner(t2, params);
    const Var v2[] = {t2.constant(Tensor({2}, 1.f))};
    const CaptionSequence capped = decode_greedy(q, encode(q, v2), 3);
    CHECK(capped.tokens == std::vector<int>{kBos, 5, 5, 5, kEos});
    CHECK(decode_greedy(q, encode(q, v2), 3) == capped);
    CHECK_THROWS_AS(decode_greedy(q, encode(q, v2), 0), std::invalid_argument);
  }
}
