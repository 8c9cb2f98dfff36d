#include <doctest.h>

#include <random>

#include "mmvdn/mil.hpp"
#include "oracles.hpp"

using namespace mmvdn;

TEST_SUITE("mil") {
  TEST_CASE("location pooling examples") {
    Tape tape;
    LocationMax one = mil_over_locations(tape.constant(Tensor({3, 1, 1}, {1, -2, 3})));
    CHECK(one.values.value() == Tensor({3}, {1, -2, 3}));
    CHECK(one.x == std::vector<int>{0, 0, 0});
    Tensor m({2, 3, 3}, 0.f);
    m.at(1, 2, 1) = 9.f;
    LocationMax r = mil_over_locations(tape.constant(m));
    CHECK(r.values.value()[1] == 9.f);
    CHECK(r.x[1] == 1);
    CHECK(r.y[1] == 2);
    CHECK(r.x[0] == 0);  // all-zero channel ties to the first cell
    CHECK(r.y[0] == 0);
  }

  TEST_CASE("location pooling equals an exhaustive scan") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor m = oracle::random_tensor({5, 4, 4}, rng);
      Tape tape;
      LocationMax r = mil_over_locations(tape.constant(m));
      for (int c = 0; c < 5; ++c) {
        float best = -INFINITY;
        int bx = -1, by = -1;
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x)
            if (m.at(c, y, x) > best) best = m.at(c, y, x), bx = x, by = y;
        CHECK(r.values.value()[static_cast<std::size_t>(c)] == best);
        CHECK(r.x[static_cast<std::size_t>(c)] == bx);
        CHECK(r.y[static_cast<std::size_t>(c)] == by);
      }
    }
  }

  TEST_CASE("scale pooling examples") {
    Tape tape;
    std::vector<LocationMax> one{mil_over_locations(tape.constant(Tensor({2, 1, 1}, {4, 5})))};
    CHECK(mil_over_scales(one).v.value() == Tensor({2}, {4, 5}));
    std::vector<LocationMax> two{mil_over_locations(tape.constant(Tensor({2, 1, 1}, {1, 5}))),
                                 mil_over_locations(tape.constant(Tensor({2, 1, 1}, {3, 2})))};
    MilResult r = mil_over_scales(two);
    CHECK(r.v.value() == Tensor({2}, {3, 5}));
    CHECK(r.winning_scale == std::vector<int>{1, 0});
    std::vector<LocationMax> bad{mil_over_locations(tape.constant(Tensor({2, 1, 1}))),
                                 mil_over_locations(tape.constant(Tensor({3, 1, 1})))};
    CHECK_THROWS_AS(mil_over_scales(bad), std::invalid_argument);
    CHECK_THROWS_AS(mil_over_scales(std::vector<LocationMax>{}), std::invalid_argument);
  }

  TEST_CASE("three random scales equal the column max") {
    std::mt19937_64 rng(2);
    Tape tape;
    std::vector<Tensor> rows;
    std::vector<LocationMax> per;
    for (int s = 0; s < 3; ++s) {
      rows.push_back(oracle::random_tensor({7}, rng));
      per.push_back(mil_over_locations(tape.constant(rows.back().reshaped({7, 1, 1}))));
    }
    MilResult r = mil_over_scales(per);
    for (std::size_t c = 0; c < 7; ++c) {
      const float best = std::max({rows[0][c], rows[1][c], rows[2][c]});
      CHECK(r.v.value()[c] == best);
      CHECK(rows[static_cast<std::size_t>(r.winning_scale[c])][c] == best);
    }
  }

  TEST_CASE("ties across scales go to the earliest scale") {
    Tape tape;
    std::vector<LocationMax> per{mil_over_locations(tape.constant(Tensor({2, 1, 1}, 1.f))),
                                 mil_over_locations(tape.constant(Tensor({2, 2, 2}, 1.f)))};
    CHECK(mil_over_scales(per).winning_scale == std::vector<int>{0, 0});
  }

  TEST_CASE("monotonicity and constant shifts") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Tensor> maps{oracle::random_tensor({4, 2, 2}, rng), oracle::random_tensor({4, 3, 3}, rng)};
      auto pool = [](const std::vector<Tensor>& ms) {
        Tape tape;
        std::vector<ScaleMap> sm;
        for (const auto& m : ms) sm.push_back({0, tape.constant(m)});
        MilResult r = mil_pool(sm);
        return std::make_tuple(r.v.value(), r.winning_scale, r.x, r.y);
      };
      auto [v, ws, xs, ys] = pool(maps);
      auto bumped = maps;
      bumped[1][5] += 0.5f;
      auto [v2, ws2, xs2, ys2] = pool(bumped);
      for (std::size_t c = 0; c < 4; ++c) CHECK(v2[c] >= v[c]);
      auto shifted = maps;
      for (auto& m : shifted)
        for (int y = 0; y < m.dim(1); ++y)
          for (int x = 0; x < m.dim(2); ++x) m.at(2, y, x) += 0.25f;
      auto [v3, ws3, xs3, ys3] = pool(shifted);
      CHECK(v3[2] == doctest::Approx(v[2] + 0.25f));
      CHECK(ws3[2] == ws[2]);
      CHECK(xs3[2] == xs[2]);
      CHECK(ys3[2] == ys[2]);
    }
  }

  TEST_CASE("gradient mass equals the number of concepts each scale wins") {
    std::mt19937_64 rng(4);
    Tape tape;
    std::vector<Var> vars{tape.variable(oracle::random_tensor({6, 1, 1}, rng)),
                          tape.variable(oracle::random_tensor({6, 3, 3}, rng))};
    std::vector<ScaleMap> sm{{35, vars[0]}, {51, vars[1]}};
    MilResult r = mil_pool(sm);
    tape.backward(sum(r.v));
    for (std::size_t s = 0; s < 2; ++s) {
      const Tensor g = tape.grad(vars[s]);
      double mass = 0;
      int nonzero = 0;
      for (float x : g.data()) {
        mass += x;
        nonzero += x != 0.f;
        CHECK((x == 0.f || x == 1.f));
      }
      const auto won = std::count(r.winning_scale.begin(), r.winning_scale.end(), static_cast<int>(s));
      CHECK(mass == static_cast<double>(won));
      CHECK(nonzero == won);
    }
  }

  TEST_CASE("localize uses the winning scale's geometry") {
    const NetworkSpec m = mininet_spec(2);
    const std::vector<GeometryReport> geo{geometry(m, 35), geometry(m, 91)};
    Tape tape;
    Tensor big({2, 8, 8}, -5.f);
    big.at(0, 3, 6) = 4.f;
    std::vector<ScaleMap> sm{{35, tape.constant(Tensor({2, 1, 1}, {1, 2}))}, {91, tape.constant(big)}};
    MilResult r = mil_pool(sm);
    localize(r, geo, 40);
    CHECK(r.winning_scale == std::vector<int>{1, 0});
    const Box b = receptive_box(geo[1], 6, 3, 40);
    CHECK(r.boxes[0].x0 == b.x0);
    CHECK(r.boxes[0].y1 == b.y1);
    CHECK(r.boxes[1].x0 == 0.0);
    CHECK(r.boxes[1].x1 == 40.0);
  }
}
