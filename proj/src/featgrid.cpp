#include "mldetect/featgrid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mldetect/error.hpp"

namespace mldetect {
namespace {

constexpr double kNormEps = 1e-4;
// Relative gap between the two best orientation responses below which a
// gradient is treated as lying exactly on a bin boundary.
constexpr double kTieTolerance = 1e-9;

struct OrientationTable {
  std::array<double, 9> cos{};
  std::array<double, 9> sin{};
  OrientationTable() {
    for (int o = 0; o < 9; ++o) {
      const double theta = o * std::numbers::pi / 9.0;
      cos[o] = std::cos(theta);
      sin[o] = std::sin(theta);
    }
  }
};

const OrientationTable& orientations() {
  static const OrientationTable table;
  return table;
}

// Adds one pixel's gradient to a cell histogram. Hard assignment to the
// nearest of 18 directions; a gradient on a bin boundary is split evenly.
void accumulate_gradient(double dx, double dy, double* hist) {
  const double mag = std::sqrt(dx * dx + dy * dy);
  if (mag == 0.0) return;
  const auto& t = orientations();
  int best = 0;
  int second = -1;
  double best_v = -1.0;
  double second_v = -1.0;
  std::array<double, 9> dots{};
  for (int o = 0; o < 9; ++o) {
    dots[o] = t.cos[o] * dx + t.sin[o] * dy;
    const double v = std::abs(dots[o]);
    if (v > best_v) {
      second = best;
      second_v = best_v;
      best = o;
      best_v = v;
    } else if (v > second_v) {
      second = o;
      second_v = v;
    }
  }
  const int best_bin = dots[best] >= 0.0 ? best : best + 9;
  if (second >= 0 && best_v - second_v <= kTieTolerance * mag) {
    const int second_bin = dots[second] >= 0.0 ? second : second + 9;
    hist[best_bin] += 0.5 * mag;
    hist[second_bin] += 0.5 * mag;
  } else {
    hist[best_bin] += mag;
  }
}

int round_to_cells(double pixels) {
  return std::max(kCellSize, kCellSize * static_cast<int>(std::lround(pixels / kCellSize)));
}

void write_u32le(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

}  // namespace

FeatureGrid compute_feature_grid(const RasterImage& img) {
  const int raw_cols = img.width / kCellSize;
  const int raw_rows = img.height / kCellSize;
  if (img.width < 16 || img.height < 16 || raw_cols < 3 || raw_rows < 3) {
    std::ostringstream msg;
    msg << img.width << "x" << img.height << " image yields no interior cells";
    throw Error(ErrorCode::ImageTooSmall, msg.str());
  }
  const int W = img.width;
  const int H = img.height;

  // Orientation histograms of every raw cell.
  std::vector<double> hist(static_cast<std::size_t>(raw_rows) * raw_cols * kOrientations, 0.0);
  for (int y = 0; y < raw_rows * kCellSize; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, H - 1);
    double* hist_row = hist.data() + static_cast<std::size_t>(y / kCellSize) * raw_cols * kOrientations;
    for (int x = 0; x < raw_cols * kCellSize; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, W - 1);
      double best_dx = 0.0;
      double best_dy = 0.0;
      double best_sq = -1.0;
      for (int c = 0; c < 3; ++c) {
        const double dx = static_cast<double>(img.at(xp, y, c)) - img.at(xm, y, c);
        const double dy = static_cast<double>(img.at(x, yp, c)) - img.at(x, ym, c);
        const double sq = dx * dx + dy * dy;
        if (sq > best_sq) {
          best_sq = sq;
          best_dx = dx;
          best_dy = dy;
        }
      }
      accumulate_gradient(best_dx, best_dy, hist_row + (x / kCellSize) * kOrientations);
    }
  }

  std::vector<double> energy(static_cast<std::size_t>(raw_rows) * raw_cols, 0.0);
  for (std::size_t i = 0; i < energy.size(); ++i) {
    const double* h = hist.data() + i * kOrientations;
    double e = 0.0;
    for (int o = 0; o < 9; ++o) e += (h[o] + h[o + 9]) * (h[o] + h[o + 9]);
    energy[i] = e;
  }
  auto energy_at = [&](int r, int c) { return energy[static_cast<std::size_t>(r) * raw_cols + c]; };

  const std::vector<double> lab = rgb_to_lab(img);

  FeatureGrid grid(raw_rows - 2, raw_cols - 2);
  for (int r = 0; r < grid.rows; ++r) {
    const int ry = r + 1;
    for (int c = 0; c < grid.cols; ++c) {
      const int rx = c + 1;
      // Blocks: up-left, up-right, down-left, down-right.
      const std::array<double, 4> norm = {
          1.0 / std::sqrt(energy_at(ry - 1, rx - 1) + energy_at(ry - 1, rx) + energy_at(ry, rx - 1) +
                          energy_at(ry, rx) + kNormEps),
          1.0 / std::sqrt(energy_at(ry - 1, rx) + energy_at(ry - 1, rx + 1) + energy_at(ry, rx) +
                          energy_at(ry, rx + 1) + kNormEps),
          1.0 / std::sqrt(energy_at(ry, rx - 1) + energy_at(ry, rx) + energy_at(ry + 1, rx - 1) +
                          energy_at(ry + 1, rx) + kNormEps),
          1.0 / std::sqrt(energy_at(ry, rx) + energy_at(ry, rx + 1) + energy_at(ry + 1, rx) +
                          energy_at(ry + 1, rx + 1) + kNormEps),
      };
      const double* h = hist.data() + (static_cast<std::size_t>(ry) * raw_cols + rx) * kOrientations;
      float* out = grid.cell(r, c);
      std::array<double, 4> block_energy{};
      for (int o = 0; o < kOrientations; ++o) {
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
          const double v = std::min(h[o] * norm[k], kTruncation);
          sum += v;
          block_energy[k] += v;
        }
        out[kSensitiveBegin + o] = static_cast<float>(0.5 * sum / 4.0);
      }
      for (int o = 0; o < 9; ++o) {
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) sum += std::min((h[o] + h[o + 9]) * norm[k], kTruncation);
        out[kInsensitiveBegin + o] = static_cast<float>(0.5 * sum / 4.0);
      }
      for (int k = 0; k < 4; ++k) out[kEnergyBegin + k] = static_cast<float>(block_energy[k] / kOrientations);

      double sa = 0.0;
      double sb = 0.0;
      for (int py = ry * kCellSize; py < (ry + 1) * kCellSize; ++py) {
        for (int px = rx * kCellSize; px < (rx + 1) * kCellSize; ++px) {
          const std::size_t i = (static_cast<std::size_t>(py) * W + px) * 3;
          sa += rescale_ab(lab[i + 1]);
          sb += rescale_ab(lab[i + 2]);
        }
      }
      constexpr double n_pixels = kCellSize * kCellSize;
      out[kColorA] = static_cast<float>(sa / n_pixels);
      out[kColorB] = static_cast<float>(sb / n_pixels);
    }
  }
  return grid;
}

const std::array<int, kChannels>& flip_channel_permutation() {
  static const std::array<int, kChannels> perm = [] {
    std::array<int, kChannels> p{};
    for (int o = 0; o < kOrientations; ++o) p[kSensitiveBegin + o] = kSensitiveBegin + (kOrientations + 9 - o) % kOrientations;
    for (int o = 0; o < 9; ++o) p[kInsensitiveBegin + o] = kInsensitiveBegin + (9 - o) % 9;
    p[kEnergyBegin + 0] = kEnergyBegin + 1;
    p[kEnergyBegin + 1] = kEnergyBegin + 0;
    p[kEnergyBegin + 2] = kEnergyBegin + 3;
    p[kEnergyBegin + 3] = kEnergyBegin + 2;
    p[kColorA] = kColorA;
    p[kColorB] = kColorB;
    return p;
  }();
  return perm;
}

FeatureGrid flip_grid(const FeatureGrid& g) {
  const auto& perm = flip_channel_permutation();
  FeatureGrid out(g.rows, g.cols);
  out.cell_size = g.cell_size;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const float* src = g.cell(r, c);
      float* dst = out.cell(r, g.cols - 1 - c);
      for (int ch = 0; ch < kChannels; ++ch) dst[perm[ch]] = src[ch];
    }
  return out;
}

FeaturePyramid build_pyramid(const RasterImage& img, const PyramidConfig& cfg) {
  const bool small = std::min(img.width, img.height) < kUpsampleBelow;
  return build_pyramid(img, cfg, cfg.upsample_small && small);
}

FeaturePyramid build_pyramid(const RasterImage& img, const PyramidConfig& cfg, bool upsample) {
  if (cfg.scales_per_octave < 1) throw Error(ErrorCode::MalformedInput, "scales_per_octave must be >= 1");
  FeaturePyramid pyr;
  pyr.scales_per_octave = cfg.scales_per_octave;
  pyr.upsampled = upsample;
  pyr.source_width = img.width;
  pyr.source_height = img.height;

  const double base = upsample ? 2.0 : 1.0;
  const double short_side = std::min(img.width, img.height) * base;
  for (int i = 0;; ++i) {
    const double rel = std::pow(2.0, -static_cast<double>(i) / cfg.scales_per_octave);
    if (i > 0 && short_side * rel < cfg.min_dim) break;
    const double scale = base * rel;
    const int w = round_to_cells(img.width * scale);
    const int h = round_to_cells(img.height * scale);
    if (w / kCellSize - 2 < 6 || h / kCellSize - 2 < 6) {
      if (i == 0) {
        std::ostringstream msg;
        msg << img.width << "x" << img.height << " image cannot hold a 6x6 cell template";
        throw Error(ErrorCode::ImageTooSmall, msg.str());
      }
      break;
    }
    PyramidLevel level;
    level.scale = scale;
    level.image_width = w;
    level.image_height = h;
    level.grid = compute_feature_grid(resize_bilinear(img, w, h));
    pyr.levels.push_back(std::move(level));
  }
  return pyr;
}

std::vector<GridView> extract_region_views(const FeaturePyramid& pyr, const Box& b) {
  std::vector<GridView> views;
  for (std::size_t l = 0; l < pyr.levels.size(); ++l) {
    const FeatureGrid& g = pyr.levels[l].grid;
    const double fx = pyr.x_factor(l);
    const double fy = pyr.y_factor(l);
    const int raw_cols = g.cols + 2;
    const int raw_rows = g.rows + 2;
    const int c0 = std::max(0, static_cast<int>(std::floor(b.x1 * fx / kCellSize)));
    const int r0 = std::max(0, static_cast<int>(std::floor(b.y1 * fy / kCellSize)));
    const int c1 = std::min(raw_cols - 1, static_cast<int>(std::ceil(b.x2() * fx / kCellSize)) - 1);
    const int r1 = std::min(raw_rows - 1, static_cast<int>(std::ceil(b.y2() * fy / kCellSize)) - 1);
    const int cols = c1 - c0 - 1;
    const int rows = r1 - r0 - 1;
    if (cols < 6 || rows < 6) continue;
    views.push_back({static_cast<int>(l), r0, c0, rows, cols});
  }
  if (views.empty()) {
    std::ostringstream msg;
    msg << "region " << b << " spans fewer than 6x6 cells at every pyramid level";
    throw Error(ErrorCode::RegionTooSmall, msg.str());
  }
  return views;
}

FeatureGrid view_grid(const FeaturePyramid& pyr, const GridView& v) {
  const FeatureGrid& g = pyr.levels.at(v.level).grid;
  FeatureGrid out(v.rows, v.cols);
  for (int r = 0; r < v.rows; ++r)
    std::memcpy(out.cell(r, 0), g.cell(v.row0 + r, v.col0), sizeof(float) * v.cols * kChannels);
  return out;
}

void write_grid_dump(std::ostream& os, const FeatureGrid& g) {
  os << g.rows << ' ' << g.cols << ' ' << kChannels << ' ' << g.cell_size << '\n';
  for (float v : g.values) write_u32le(os, std::bit_cast<std::uint32_t>(v));
}

FeatureGrid read_grid_dump(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(ErrorCode::MalformedInput, "missing grid dump header");
  std::istringstream hs(header);
  int rows = 0, cols = 0, channels = 0, cell_size = 0;
  if (!(hs >> rows >> cols >> channels >> cell_size) || channels != kChannels || rows < 0 || cols < 0)
    throw Error(ErrorCode::MalformedInput, "bad grid dump header: " + header);
  FeatureGrid g(rows, cols);
  g.cell_size = cell_size;
  for (float& v : g.values) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::MalformedInput, "truncated grid dump");
    const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    v = std::bit_cast<float>(u);
  }
  return g;
}

PyramidCache::PyramidCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::shared_ptr<PyramidCache> PyramidCache::from_environment() {
  const char* dir = std::getenv("MLDETECT_CACHE");
  if (dir == nullptr || *dir == '\0') return nullptr;
  return std::make_shared<PyramidCache>(dir);
}

std::optional<FeaturePyramid> PyramidCache::load(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".pyr"), std::ios::binary);
  if (!in) return std::nullopt;
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  std::size_t n = 0;
  FeaturePyramid pyr;
  int up = 0;
  if (!(hs >> magic >> n >> pyr.scales_per_octave >> up >> pyr.source_width >> pyr.source_height) ||
      magic != "mldetect-pyramid")
    return std::nullopt;
  pyr.upsampled = up != 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    std::istringstream ls(line);
    std::string scale_hex;
    PyramidLevel level;
    if (!(ls >> scale_hex >> level.image_width >> level.image_height)) return std::nullopt;
    level.scale = std::strtod(scale_hex.c_str(), nullptr);
    level.grid = read_grid_dump(in);
    pyr.levels.push_back(std::move(level));
  }
  return pyr;
}

void PyramidCache::store(const std::string& key, const FeaturePyramid& pyr) const {
  const auto final_path = dir_ / (key + ".pyr");
  const auto tmp_path = dir_ / (key + ".pyr.tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write pyramid cache entry " + tmp_path.string());
    out << "mldetect-pyramid " << pyr.levels.size() << ' ' << pyr.scales_per_octave << ' '
        << (pyr.upsampled ? 1 : 0) << ' ' << pyr.source_width << ' ' << pyr.source_height << '\n';
    for (const auto& level : pyr.levels) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%a", level.scale);
      out << buf << ' ' << level.image_width << ' ' << level.image_height << '\n';
      write_grid_dump(out, level.grid);
    }
  }
  std::filesystem::rename(tmp_path, final_path);
}

PyramidSet::PyramidSet(RasterImage img, PyramidConfig cfg, std::shared_ptr<PyramidCache> cache,
                       std::string cache_key)
    : image_(std::move(img)), cfg_(cfg), cache_(std::move(cache)), cache_key_(std::move(cache_key)), lazy_(std::make_unique<Lazy>()) {}

const FeaturePyramid& PyramidSet::normal() const { return get(0); }
const FeaturePyramid& PyramidSet::upsampled() const { return get(1); }

bool PyramidSet::wants_upsampled(const Box& b) const noexcept {
  return cfg_.upsample_small && std::min(b.w, b.h) < kUpsampleBelow;
}

const FeaturePyramid& PyramidSet::get(int which) const {
  std::call_once(lazy_->once[which], [&] {
    const bool up = which == 1;
    std::string key;
    if (cache_ && !cache_key_.empty()) {
      key = cache_key_ + "_s" + std::to_string(cfg_.scales_per_octave) + "_m" + std::to_string(cfg_.min_dim) +
            (up ? "_up" : "_n");
      if (auto hit = cache_->load(key)) {
        lazy_->pyramids[which] = std::make_unique<FeaturePyramid>(std::move(*hit));
        return;
      }
    }
    lazy_->pyramids[which] = std::make_unique<FeaturePyramid>(build_pyramid(image_, cfg_, up));
    if (!key.empty()) cache_->store(key, *lazy_->pyramids[which]);
  });
  return *lazy_->pyramids[which];
}

}  // namespace mldetect
