#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "mmvdn/training.hpp"

using namespace mmvdn;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.scales = {35, 91};
  c.hidden = 16;
  c.embed = 8;
  c.steps = 12;
  c.eval_every = 6;
  c.batch = 2;
  return c;
}

CaptionData tiny_data() {
  CorpusOptions o;
  o.seed = 5;
  o.train = 4;
  o.val = 2;
  o.test = 2;
  return make_caption_data(generate_videos(o));
}

void require_same_params(const ParameterSet& a, const ParameterSet& b) {
  REQUIRE(a.size() == b.size());
  for (const auto& p : a) CHECK(b.get(p->name).value == p->value);
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config keys, defaults and rejection") {
    const TrainConfig d = TrainConfig::from(KeyValueConfig::parse(""));
    CHECK(d.scales == std::vector<int>{35, 91});
    CHECK(d.fc8_transfer);
    const TrainConfig c = TrainConfig::from(KeyValueConfig::parse("scales=35,63\nfreeze=none\nfc8_init=zero\nlr=0.5\n"));
    CHECK(c.scales == std::vector<int>{35, 63});
    CHECK(c.freeze.empty());
    CHECK_FALSE(c.fc8_transfer);
    CHECK(c.lr == 0.5);
    CHECK_THROWS_AS(TrainConfig::from(KeyValueConfig::parse("learning_rate=1\n")), std::invalid_argument);
    CHECK_THROWS_AS(TrainConfig::from(KeyValueConfig::parse("fc8_init=random\n")), std::invalid_argument);
    CHECK(d.lr_drop_at == 1.0);
    CHECK(TrainConfig::from(KeyValueConfig::parse("pretrain_lr_drop_at=0.5\n")).pretrain_lr_drop_at == 0.5);
    CHECK_THROWS_AS(TrainConfig::from(KeyValueConfig::parse("lr_drop_at=0\n")), std::invalid_argument);
  }

  TEST_CASE("layer names and freezing") {
    CHECK(layer_of("conv1.weight") == "conv1");
    CHECK(layer_of("convfc6.bias") == "fc6");
    CHECK(layer_of("convfc8.s91.weight") == "fc8");
    CHECK(layer_of("lstm2.weight") == "lstm");
    CHECK(layer_of("embed") == "lstm");
    ParameterSet p;
    p.add("conv1.weight", Tensor({2}, 1.f));
    p.add("convfc8.s35.weight", Tensor({2}, 1.f));
    p.add("out.weight", Tensor({2}, 1.f));
    CHECK(apply_freeze(p, {"conv1", "fc8"}) == 2);
    CHECK(p.get("conv1.weight").frozen);
    CHECK_FALSE(p.get("out.weight").frozen);
  }

  TEST_CASE("momentum update, clipping and frozen parameters") {
    ParameterSet p;
    Parameter& w = p.add("w", Tensor({2}, std::vector<float>{1.f, 2.f}));
    Parameter& f = p.add("f", Tensor({1}, 3.f));
    f.frozen = true;
    Sgd opt(0.1, 0.5, 100.0);
    w.grad = Tensor({2}, std::vector<float>{1.f, -1.f});
    f.grad = Tensor({1}, 7.f);
    CHECK(opt.step(p) == doctest::Approx(std::sqrt(2.0)));
    CHECK(w.value[0] == doctest::Approx(0.9));
    CHECK(w.value[1] == doctest::Approx(2.1));
    CHECK(f.value[0] == 3.f);
    // v = 0.5 * (-0.1) - 0.1 * 1 = -0.15
    w.grad = Tensor({2}, std::vector<float>{1.f, -1.f});
    opt.step(p);
    CHECK(w.value[0] == doctest::Approx(0.75));

    w.grad = Tensor({2}, std::vector<float>{30.f, 40.f});
    CHECK(clip_gradients(p, 5.0) == doctest::Approx(50.0));
    CHECK(w.grad[0] == doctest::Approx(3.0));
    CHECK(w.grad[1] == doctest::Approx(4.0));
    CHECK(gradient_norm(p) == doctest::Approx(5.0));
  }

  TEST_CASE("model construction validates scales and transfers fc8") {
    const NetworkSpec spec = mininet_spec(kClassCount);
    const ParameterSet cls = build_classifier(spec, 3);
    const CaptionData data = tiny_data();
    CHECK_THROWS_AS(make_model(spec, cls, {}, true, data.vocab, 8, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_model(spec, cls, {35, 35}, true, data.vocab, 8, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_model(spec, cls, {20}, true, data.vocab, 8, 4, 1), std::invalid_argument);
    Model m = make_model(spec, cls, {35, 91}, true, data.vocab, 8, 4, 1);
    CHECK(m.params.get(head_weight_name(91)).value == m.params.get(head_weight_name(35)).value);
    Model z = make_model(spec, cls, {35, 91}, false, data.vocab, 8, 4, 1);
    for (float v : z.params.get(head_weight_name(91)).value.data()) CHECK(v == 0.f);
  }

  TEST_CASE("training is deterministic and respects the freeze list") {
    const NetworkSpec spec = mininet_spec(kClassCount);
    const ParameterSet cls = build_classifier(spec, 3);
    const CaptionData data = tiny_data();
    const TrainConfig cfg = tiny_config();
    TrainResult a = train_captioner(cfg, spec, cls, data);
    TrainResult b = train_captioner(cfg, spec, cls, data);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].to_line() == b.log[i].to_line());
    require_same_params(a.model.params, b.model.params);
    CHECK(a.log.back().step == cfg.steps);

    const ParameterSet fcn = convert_to_fcn(cls, spec);
    for (const char* name : {"conv1.weight", "conv2.bias", "convfc6.weight", "convfc7.bias"})
      CHECK(a.model.params.get(name).value == fcn.get(name).value);
  }

  TEST_CASE("frozen trunk is bit-identical after 100 steps") {
    const NetworkSpec spec = mininet_spec(kClassCount);
    const ParameterSet cls = build_classifier(spec, 5);
    const CaptionData data = tiny_data();
    TrainConfig cfg = tiny_config();
    cfg.steps = 100;
    cfg.batch = 1;
    cfg.eval_every = 100;
    TrainResult r = train_captioner(cfg, spec, cls, data);
    const ParameterSet fcn = convert_to_fcn(cls, spec);
    for (const auto& p : r.model.params) {
      const std::string layer = layer_of(p->name);
      if (layer == "conv1" || layer == "conv2" || layer == "fc6" || layer == "fc7")
        CHECK(p->value == fcn.get(p->name).value);
    }
    CHECK(r.model.params.get(head_weight_name(91)).value != fcn.get("convfc8.weight").value);
  }

  TEST_CASE("pre-training with zero learning rate leaves the classifier unchanged") {
    TrainConfig cfg;
    cfg.pretrain_lr = 0.0;
    cfg.pretrain_steps = 3;
    cfg.pretrain_eval_every = 3;
    const NetworkSpec spec = cfg.network();
    const ClassificationSet set = generate_classification_set(2, 1);
    PretrainResult r = pretrain_classifier(cfg, spec, set, set);
    require_same_params(r.params, build_classifier(spec, cfg.seed));
    REQUIRE(r.log.size() == 1);
    CHECK(r.log[0].rfind("step=3 ", 0) == 0);
  }

  TEST_CASE("cached features caption like the full forward path") {
    const NetworkSpec spec = mininet_spec(kClassCount);
    const ParameterSet cls = build_classifier(spec, 4);
    const CaptionData data = tiny_data();
    TrainConfig cfg = tiny_config();
    cfg.keep_best = false;
    FeatureBank bank;
    TrainResult cached = train_captioner(cfg, spec, cls, data, &bank);
    CHECK(bank.has(91, Split::train));
    bank.add(cached.model, data.test, Split::test);
    for (int i = 0; i < data.test.size(); ++i) {
      const CaptionSequence full = caption(cached.model, data.test.frames[static_cast<std::size_t>(i)]);
      const CaptionSequence fast = caption(cached.model, bank.video(cached.model, Split::test, i));
      CHECK(full.tokens == fast.tokens);
    }
  }

  TEST_CASE("zero learning rate leaves every parameter unchanged") {
    const NetworkSpec spec = mininet_spec(kClassCount);
    const ParameterSet cls = build_classifier(spec, 6);
    const CaptionData data = tiny_data();
    TrainConfig cfg = tiny_config();
    cfg.lr = 0.0;
    cfg.freeze.clear();
    cfg.keep_best = false;
    cfg.steps = 2;
    TrainResult r = train_captioner(cfg, spec, cls, data);
    const Model fresh = make_model(spec, cls, cfg.scales, true, data.vocab, cfg.hidden, cfg.embed, cfg.seed);
    require_same_params(r.model.params, fresh.params);
  }

  TEST_CASE("model files round-trip bitwise and caption identically") {
    const NetworkSpec spec = mininet_spec(kClassCount);
    const ParameterSet cls = build_classifier(spec, 8);
    const CaptionData data = tiny_data();
    Model m = make_model(spec, cls, {35, 63, 91}, true, data.vocab, 8, 4, 2, MultiscaleOptions{true});
    const auto path = std::filesystem::temp_directory_path() / "mmvdn_model_roundtrip.mmvd";
    save_model(m, path.string());
    Model back = load_model(path.string());
    CHECK(back.scales == m.scales);
    CHECK(back.options.five_crop);
    CHECK(back.vocab.size() == m.vocab.size());
    CHECK(format_network_spec(back.spec) == format_network_spec(m.spec));
    require_same_params(back.params, m.params);
    for (const auto& frames : data.test.frames) CHECK(caption(back, frames).tokens == caption(m, frames).tokens);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".vocab");
  }

  TEST_CASE("ablation helpers") {
    const auto sets = parse_scale_sets("35;35,91;91");
    REQUIRE(sets.size() == 3);
    CHECK(sets[1] == std::vector<int>{35, 91});
    CHECK_THROWS_AS(parse_scale_sets(""), std::invalid_argument);
    AblationRow row{{35, 91}, {0.2, 0.4, 0.3}};
    CHECK(row.mean() == doctest::Approx(0.3));
    CHECK(row.min() == 0.2);
    CHECK(row.max() == 0.4);
    const std::string tsv = format_ablation({row});
    CHECK(tsv.find("35,91\t3\t0.3") != std::string::npos);
  }
}
