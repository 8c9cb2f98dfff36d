#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "mmvdn/tensor.hpp"

namespace mmvdn {

enum class ObjectShape { square, circle, triangle, diamond, cross };
enum class ObjectColor { red, green, blue, yellow };
enum class SizeClass { large, small };
enum class Verb { moving, blinking, fading, appearing };

inline constexpr int kShapeCount = 5;
inline constexpr int kColorCount = 4;
inline constexpr int kSizeCount = 2;
inline constexpr int kVerbCount = 4;
inline constexpr int kClassCount = kShapeCount * kColorCount * kSizeCount;

// Side-length ranges in frame pixels.
inline constexpr int kSmallMin = 6;
inline constexpr int kSmallMax = 10;
inline constexpr int kLargeMin = 28;
inline constexpr int kLargeMax = 34;
// Small objects as they appear after upsampling a frame by 91/40: the size
// at which classifier pre-training shows them.
inline constexpr int kSmallViewMin = 14;
inline constexpr int kSmallViewMax = 23;

std::string_view name(ObjectShape s);
std::string_view name(ObjectColor c);
std::string_view name(SizeClass s);
std::string_view name(Verb v);
ObjectShape parse_shape(std::string_view s);
ObjectColor parse_color(std::string_view s);
SizeClass parse_size(std::string_view s);
Verb parse_verb(std::string_view s);

// Classifier label of a (shape, color, size) triple, 0..kClassCount-1.
int class_index(ObjectShape shape, ObjectColor color, SizeClass size);
void class_parts(int index, ObjectShape& shape, ObjectColor& color, SizeClass& size);

// Opacity of an object with this verb in frame t of a `frames`-long clip.
float visibility(Verb verb, int t, int frames);

std::array<float, 3> rgb(ObjectColor c);

// Portable integer draw in [lo, hi].
int draw_int(std::mt19937_64& rng, int lo, int hi);
float draw_unit(std::mt19937_64& rng);

// Gray striped texture plus per-pixel noise, [3 x size x size] in [0, 1].
Tensor render_background(std::mt19937_64& rng, int size);

// Blends an anti-aliased solid shape whose bounding box has top-left
// (x0, y0) and side `side` into `frame` with opacity `alpha`.
void draw_shape(Tensor& frame, ObjectShape shape, ObjectColor color, int x0, int y0, int side, float alpha);

}  // namespace mmvdn
