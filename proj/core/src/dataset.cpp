// Copyright (c) 2026 the plasm authors
// SPDX-License-Identifier: Apache-2.0

#include "plasm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "plasm/detail/io.hpp"

namespace plasm {

namespace {

constexpr int64_t kSpriteSize = 12;
constexpr char kMagic[4] = {'V', 'S', 'E', 'Q'};
constexpr uint8_t kVersion = 1;

// Procedural 12x12 intensity stamps; all shapes are built from exact
// arithmetic so a (seed, kind, gain) triple always yields the same bytes.
std::vector<uint8_t> make_stamp(int64_t kind, double gain) {
  std::vector<uint8_t> stamp(kSpriteSize * kSpriteSize, 0);
  const double c = (kSpriteSize - 1) / 2.0;
  for (int64_t y = 0; y < kSpriteSize; ++y) {
    for (int64_t x = 0; x < kSpriteSize; ++x) {
      const double dx = x - c, dy = y - c;
      const double d = std::sqrt(dx * dx + dy * dy);
      double v = 0.0;
      switch (kind & 3) {
        case 0:  // filled disc with a soft rim
          v = std::clamp((5.5 - d) / 1.5, 0.0, 1.0);
          break;
        case 1:  // ring
          v = std::clamp(1.5 - std::abs(d - 4.0), 0.0, 1.0);
          break;
        case 2:  // plus sign
          v = (std::abs(dx) < 2.0 || std::abs(dy) < 2.0) && d < 5.8 ? 1.0 : 0.0;
          break;
        default:  // diamond
          v = std::clamp((6.0 - (std::abs(dx) + std::abs(dy))) / 1.5, 0.0, 1.0);
          break;
      }
      stamp[static_cast<size_t>(y * kSpriteSize + x)] =
          static_cast<uint8_t>(std::lround(std::clamp(v * gain, 0.0, 1.0) * 255.0));
    }
  }
  return stamp;
}

void check_dims(uint64_t n_clips, uint64_t t_total, uint64_t channels, uint64_t height,
                uint64_t width) {
  const uint64_t kLimit = uint64_t(1) << 40;
  uint64_t total = 1;
  for (uint64_t d : {n_clips, t_total, channels, height, width}) {
    if (d == 0) throw FormatError("dataset header has a zero dimension");
    if (d > kLimit || total > kLimit / d) throw FormatError("dataset header dimension overflow");
    total *= d;
  }
}

}  // namespace

void VideoDataset::copy_clip_f32(int64_t clip, float* dst) const {
  const int64_t n = clip_elems();
  if (dtype == Pixel::u8) {
    const uint8_t* src = data_u8.data() + clip * n;
    for (int64_t i = 0; i < n; ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
  } else {
    std::copy_n(data_f32.data() + clip * n, n, dst);
  }
}

std::vector<float> VideoDataset::as_f32() const {
  std::vector<float> out(static_cast<size_t>(total_elems()));
  for (int64_t c = 0; c < n_clips; ++c) copy_clip_f32(c, out.data() + c * clip_elems());
  return out;
}

std::pair<double, double> advance_position(double pos, double vel, double max) {
  double next = pos + vel;
  double v = vel;
  if (next > max) {
    next = 2.0 * max - next;
    v = -v;
  } else if (next < 0.0) {
    next = -next;
    v = -v;
  }
  return {next, v};
}

VideoDataset gen_moving_shapes(int64_t n_clips, int64_t t_total, int64_t height, int64_t width,
                               int64_t n_sprites, Rng rng) {
  require(height >= 2 * kSpriteSize && width >= 2 * kSpriteSize,
          "gen_moving_shapes: frame must be at least 24x24");
  require(n_clips >= 1 && t_total >= 1 && n_sprites >= 1, "gen_moving_shapes: counts must be positive");

  VideoDataset ds;
  ds.n_clips = n_clips;
  ds.t_total = t_total;
  ds.channels = 1;
  ds.height = height;
  ds.width = width;
  ds.dtype = VideoDataset::Pixel::u8;
  ds.data_u8.assign(static_cast<size_t>(ds.total_elems()), 0);

  const double max_x = static_cast<double>(width - kSpriteSize);
  const double max_y = static_cast<double>(height - kSpriteSize);

  struct Sprite {
    std::vector<uint8_t> stamp;
    double x, y, vx, vy;
  };

  for (int64_t clip = 0; clip < n_clips; ++clip) {
    Rng crng = rng.stream(static_cast<uint64_t>(clip));
    std::vector<Sprite> sprites;
    for (int64_t s = 0; s < n_sprites; ++s) {
      Sprite sp;
      sp.stamp = make_stamp(crng.below(4), crng.uniform(0.7, 1.0));
      sp.x = crng.uniform(0.0, max_x);
      sp.y = crng.uniform(0.0, max_y);
      const double speed = crng.uniform(1.0, 4.0);
      const double angle = crng.uniform(0.0, 6.283185307179586477);
      sp.vx = speed * std::cos(angle);
      sp.vy = speed * std::sin(angle);
      sprites.push_back(std::move(sp));
    }
    for (int64_t t = 0; t < t_total; ++t) {
      uint8_t* frame = ds.data_u8.data() + (clip * t_total + t) * ds.frame_elems();
      for (auto& sp : sprites) {
        const int64_t ix = std::llround(sp.x);
        const int64_t iy = std::llround(sp.y);
        for (int64_t sy = 0; sy < kSpriteSize; ++sy) {
          const int64_t fy = iy + sy;
          if (fy < 0 || fy >= height) continue;
          for (int64_t sx = 0; sx < kSpriteSize; ++sx) {
            const int64_t fx = ix + sx;
            if (fx < 0 || fx >= width) continue;
            uint8_t& px = frame[fy * width + fx];
            px = std::max(px, sp.stamp[static_cast<size_t>(sy * kSpriteSize + sx)]);
          }
        }
        std::tie(sp.x, sp.vx) = advance_position(sp.x, sp.vx, max_x);
        std::tie(sp.y, sp.vy) = advance_position(sp.y, sp.vy, max_y);
      }
    }
  }
  return ds;
}

void save_dataset(const std::string& path, const VideoDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  detail::write_bytes(os, kMagic, 4);
  detail::write_u8(os, kVersion);
  detail::write_u8(os, static_cast<uint8_t>(ds.dtype));
  detail::write_u8(os, 0);
  detail::write_u8(os, 0);
  detail::write_u32le(os, static_cast<uint32_t>(ds.n_clips));
  detail::write_u32le(os, static_cast<uint32_t>(ds.t_total));
  detail::write_u32le(os, static_cast<uint32_t>(ds.channels));
  detail::write_u32le(os, static_cast<uint32_t>(ds.height));
  detail::write_u32le(os, static_cast<uint32_t>(ds.width));
  if (ds.dtype == VideoDataset::Pixel::u8) {
    detail::write_bytes(os, ds.data_u8.data(), ds.data_u8.size());
  } else {
    detail::write_f32le_array(os, ds.data_f32.data(), ds.data_f32.size());
  }
  if (!os) throw FormatError("write failed for '" + path + "'");
}

VideoDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  char magic[4];
  detail::read_bytes(is, magic, 4, "VSEQ magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic: not a VSEQ file");
  const uint8_t version = detail::read_u8(is, "VSEQ version");
  if (version != kVersion)
    throw FormatError("unsupported VSEQ version " + std::to_string(version));
  const uint8_t dtype = detail::read_u8(is, "VSEQ dtype");
  if (dtype > 1) throw FormatError("unknown VSEQ dtype " + std::to_string(dtype));
  detail::read_u8(is, "VSEQ reserved");
  detail::read_u8(is, "VSEQ reserved");

  const uint32_t n_clips = detail::read_u32le(is, "VSEQ n_clips");
  const uint32_t t_total = detail::read_u32le(is, "VSEQ t_total");
  const uint32_t channels = detail::read_u32le(is, "VSEQ channels");
  const uint32_t height = detail::read_u32le(is, "VSEQ height");
  const uint32_t width = detail::read_u32le(is, "VSEQ width");
  check_dims(n_clips, t_total, channels, height, width);

  VideoDataset ds;
  ds.n_clips = n_clips;
  ds.t_total = t_total;
  ds.channels = channels;
  ds.height = height;
  ds.width = width;
  ds.dtype = static_cast<VideoDataset::Pixel>(dtype);
  const size_t total = static_cast<size_t>(ds.total_elems());
  if (ds.dtype == VideoDataset::Pixel::u8) {
    ds.data_u8.resize(total);
    detail::read_bytes(is, ds.data_u8.data(), total, "VSEQ payload");
  } else {
    ds.data_f32.resize(total);
    detail::read_f32le_array(is, ds.data_f32.data(), total, "VSEQ payload");
  }
  is.peek();
  if (!is.eof()) throw FormatError("VSEQ payload longer than header dimensions");
  return ds;
}

BatchStream::BatchStream(const VideoDataset& ds, int64_t t_in, int64_t t_out, int64_t batch_size,
                         Rng rng)
    : ds_(ds), t_in_(t_in), t_out_(t_out), batch_size_(batch_size) {
  require(batch_size >= 1, "batches: batch size must be >= 1");
  require(t_in >= 1 && t_out >= 0, "batches: invalid segment lengths");
  require(ds.t_total >= t_in + t_out,
          "batches: clips have " + std::to_string(ds.t_total) + " frames, need " +
              std::to_string(t_in + t_out));
  order_.resize(static_cast<size_t>(ds.n_clips));
  std::iota(order_.begin(), order_.end(), 0);
  for (int64_t i = ds.n_clips - 1; i > 0; --i) {
    const int64_t j = rng.below(i + 1);
    std::swap(order_[static_cast<size_t>(i)], order_[static_cast<size_t>(j)]);
  }
}

bool BatchStream::next(Tensor& input, Tensor& target) {
  if (cursor_ + batch_size_ > static_cast<int64_t>(order_.size())) return false;
  const int64_t fe = ds_.frame_elems();
  std::vector<float> in(static_cast<size_t>(batch_size_ * t_in_ * fe));
  std::vector<float> tg(static_cast<size_t>(batch_size_ * t_out_ * fe));
  std::vector<float> clip(static_cast<size_t>(ds_.clip_elems()));
  for (int64_t b = 0; b < batch_size_; ++b) {
    ds_.copy_clip_f32(order_[static_cast<size_t>(cursor_ + b)], clip.data());
    std::copy_n(clip.data(), t_in_ * fe, in.data() + b * t_in_ * fe);
    std::copy_n(clip.data() + t_in_ * fe, t_out_ * fe, tg.data() + b * t_out_ * fe);
  }
  cursor_ += batch_size_;
  input = Tensor::from_data({batch_size_, t_in_, ds_.channels, ds_.height, ds_.width}, std::move(in));
  if (t_out_ > 0)
    target = Tensor::from_data({batch_size_, t_out_, ds_.channels, ds_.height, ds_.width}, std::move(tg));
  return true;
}

}  // namespace plasm
