#include "mmvdn/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mmvdn {

namespace {
constexpr std::string_view kShapeNames[] = {"square", "circle", "triangle", "diamond", "cross"};
constexpr std::string_view kColorNames[] = {"red", "green", "blue", "yellow"};
constexpr std::string_view kSizeNames[] = {"large", "small"};
constexpr std::string_view kVerbNames[] = {"moving", "blinking", "fading", "appearing"};

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::string_view (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(s) + "'");
}
}  // namespace

std::string_view name(ObjectShape s) { return kShapeNames[static_cast<int>(s)]; }
std::string_view name(ObjectColor c) { return kColorNames[static_cast<int>(c)]; }
std::string_view name(SizeClass s) { return kSizeNames[static_cast<int>(s)]; }
std::string_view name(Verb v) { return kVerbNames[static_cast<int>(v)]; }
ObjectShape parse_shape(std::string_view s) { return parse_enum<ObjectShape>(s, kShapeNames, "shape"); }
ObjectColor parse_color(std::string_view s) { return parse_enum<ObjectColor>(s, kColorNames, "color"); }
SizeClass parse_size(std::string_view s) { return parse_enum<SizeClass>(s, kSizeNames, "size class"); }
Verb parse_verb(std::string_view s) { return parse_enum<Verb>(s, kVerbNames, "verb"); }

int class_index(ObjectShape shape, ObjectColor color, SizeClass size) {
  return (static_cast<int>(shape) * kColorCount + static_cast<int>(color)) * kSizeCount + static_cast<int>(size);
}

void class_parts(int index, ObjectShape& shape, ObjectColor& color, SizeClass& size) {
  if (index < 0 || index >= kClassCount) throw std::out_of_range("class index " + std::to_string(index));
  size = static_cast<SizeClass>(index % kSizeCount);
  color = static_cast<ObjectColor>((index / kSizeCount) % kColorCount);
  shape = static_cast<ObjectShape>(index / (kSizeCount * kColorCount));
}

float visibility(Verb verb, int t, int frames) {
  switch (verb) {
    case Verb::moving:
      return 1.f;
    case Verb::blinking:
      return t % 2 == 0 ? 1.f : 0.f;
    case Verb::fading:
      return frames > 1 ? 1.f - 0.75f * static_cast<float>(t) / static_cast<float>(frames - 1) : 1.f;
    case Verb::appearing:
      return t < frames / 2 ? 0.f : 1.f;
  }
  return 1.f;
}

std::array<float, 3> rgb(ObjectColor c) {
  switch (c) {
    case ObjectColor::red:
      return {0.90f, 0.12f, 0.12f};
    case ObjectColor::green:
      return {0.12f, 0.80f, 0.20f};
    case ObjectColor::blue:
      return {0.15f, 0.25f, 0.95f};
    case ObjectColor::yellow:
      return {0.95f, 0.90f, 0.10f};
  }
  return {0.f, 0.f, 0.f};
}

int draw_int(std::mt19937_64& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

float draw_unit(std::mt19937_64& rng) { return static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f); }

Tensor render_background(std::mt19937_64& rng, int size) {
  Tensor bg({3, size, size});
  const float base = 0.35f + 0.2f * draw_unit(rng);
  const float angle = draw_unit(rng) * std::numbers::pi_v<float>;
  const float period = 6.f + 6.f * draw_unit(rng);
  const float phase = draw_unit(rng) * 2.f * std::numbers::pi_v<float>;
  const float ca = std::cos(angle), sa = std::sin(angle);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const float stripe = 0.06f * std::sin(2.f * std::numbers::pi_v<float> * (x * ca + y * sa) / period + phase);
      const float noise = 0.08f * (draw_unit(rng) - 0.5f);
      const float v = std::clamp(base + stripe + noise, 0.f, 1.f);
      for (int c = 0; c < 3; ++c) bg.at(c, y, x) = v;
    }
  }
  return bg;
}

namespace {

// (u, v) relative to the box center, in units of the side length.
bool inside(ObjectShape shape, float u, float v) {
  switch (shape) {
    case ObjectShape::square:
      return std::abs(u) <= 0.5f && std::abs(v) <= 0.5f;
    case ObjectShape::circle:
      return u * u + v * v <= 0.25f;
    case ObjectShape::triangle: {
      // apex at the top edge, base along the bottom edge
      if (v < -0.5f || v > 0.5f) return false;
      return std::abs(u) <= 0.5f * (v + 0.5f);
    }
    case ObjectShape::diamond:
      return std::abs(u) + std::abs(v) <= 0.5f;
    case ObjectShape::cross:
      return (std::abs(u) <= 1.f / 6.f && std::abs(v) <= 0.5f) || (std::abs(v) <= 1.f / 6.f && std::abs(u) <= 0.5f);
  }
  return false;
}

}  // namespace

void draw_shape(Tensor& frame, ObjectShape shape, ObjectColor color, int x0, int y0, int side, float alpha) {
  if (alpha <= 0.f) return;
  constexpr int kSub = 4;
  const auto col = rgb(color);
  const int h = frame.dim(1), w = frame.dim(2);
  const float cx = x0 + side / 2.f;
  const float cy = y0 + side / 2.f;
  for (int y = std::max(0, y0); y < std::min(h, y0 + side); ++y) {
    for (int x = std::max(0, x0); x < std::min(w, x0 + side); ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const float px = x + (sx + 0.5f) / kSub;
          const float py = y + (sy + 0.5f) / kSub;
          hits += inside(shape, (px - cx) / side, (py - cy) / side);
        }
      }
      if (hits == 0) continue;
      const float a = alpha * static_cast<float>(hits) / (kSub * kSub);
      for (int c = 0; c < 3; ++c) frame.at(c, y, x) = frame.at(c, y, x) * (1.f - a) + col[static_cast<std::size_t>(c)] * a;
    }
  }
}

}  // namespace mmvdn
