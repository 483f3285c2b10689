#include "mldetect/element.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mldetect/binary_io.hpp"
#include "mldetect/error.hpp"

namespace mldetect {

std::string_view to_string(ElementKind kind) noexcept {
  return kind == ElementKind::Discriminative ? "discriminative" : "localization";
}

ResponseMap score_grid(const Element& e, const FeatureGrid& g) {
  if (g.rows < kTemplateCells || g.cols < kTemplateCells) {
    std::ostringstream msg;
    msg << g.rows << "x" << g.cols << " grid is smaller than the 6x6 template";
    throw Error(ErrorCode::GridTooSmall, msg.str());
  }
  ResponseMap out;
  out.rows = g.rows - kTemplateCells + 1;
  out.cols = g.cols - kTemplateCells + 1;
  out.values.resize(static_cast<std::size_t>(out.rows) * out.cols);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      double acc = 0.0;
      for (int dr = 0; dr < kTemplateCells; ++dr) {
        const float* x = g.cell(r + dr, c);
        const float* w = e.weights.data() + dr * kTemplateRowSize;
        for (int i = 0; i < kTemplateRowSize; ++i) acc += static_cast<double>(w[i]) * x[i];
      }
      out.values[static_cast<std::size_t>(r) * out.cols + c] = acc + e.bias;
    }
  }
  return out;
}

Element flip_element(const Element& e) {
  const auto& perm = flip_channel_permutation();
  Element out = e;
  for (int r = 0; r < kTemplateCells; ++r)
    for (int c = 0; c < kTemplateCells; ++c) {
      const float* src = e.weights.data() + (r * kTemplateCells + c) * kChannels;
      float* dst = out.weights.data() + (r * kTemplateCells + (kTemplateCells - 1 - c)) * kChannels;
      for (int ch = 0; ch < kChannels; ++ch) dst[perm[ch]] = src[ch];
    }
  return out;
}

TemplateMatrix::TemplateMatrix(std::span<const Element> elements)
    : weights(kTemplateSize, static_cast<Eigen::Index>(elements.size())),
      bias(static_cast<Eigen::Index>(elements.size())) {
  for (std::size_t j = 0; j < elements.size(); ++j) {
    const auto& w = elements[j].weights;
    for (int i = 0; i < kTemplateSize; ++i) weights(i, static_cast<Eigen::Index>(j)) = w[i];
    bias(static_cast<Eigen::Index>(j)) = elements[j].bias;
  }
}

Eigen::MatrixXd window_matrix(const FeatureGrid& g, int row0, int col0, int rows, int cols) {
  const int pr = rows - kTemplateCells + 1;
  const int pc = cols - kTemplateCells + 1;
  if (pr < 1 || pc < 1) throw Error(ErrorCode::GridTooSmall, "view smaller than the 6x6 template");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor m(static_cast<Eigen::Index>(pr) * pc, kTemplateSize);
  for (int r = 0; r < pr; ++r)
    for (int c = 0; c < pc; ++c) {
      double* dst = m.row(static_cast<Eigen::Index>(r) * pc + c).data();
      for (int dr = 0; dr < kTemplateCells; ++dr) {
        const float* src = g.cell(row0 + r + dr, col0 + c);
        for (int i = 0; i < kTemplateRowSize; ++i) dst[dr * kTemplateRowSize + i] = src[i];
      }
    }
  return m;
}

Eigen::MatrixXd score_windows(const TemplateMatrix& t, const FeatureGrid& g, int row0, int col0, int rows,
                              int cols) {
  Eigen::MatrixXd out = window_matrix(g, row0, col0, rows, cols) * t.weights;
  out.rowwise() += t.bias;
  return out;
}

std::size_t ElementBank::count(int category, ElementKind kind) const {
  return static_cast<std::size_t>(std::count_if(elements.begin(), elements.end(), [&](const Element& e) {
    return e.category == category && e.kind == kind;
  }));
}

namespace {

bool canonical_less(const Element& a, const Element& b) {
  if (a.category != b.category) return a.category < b.category;
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.mining_score != b.mining_score) return a.mining_score > b.mining_score;
  return a.id < b.id;
}

}  // namespace

bool ElementBank::ordering_holds() const {
  for (std::size_t i = 1; i < elements.size(); ++i)
    if (canonical_less(elements[i], elements[i - 1])) return false;
  return true;
}

void ElementBank::canonicalize() { std::stable_sort(elements.begin(), elements.end(), canonical_less); }

ElementBank ElementBank::subset(std::size_t n_disc, std::size_t n_loc) const {
  ElementBank out;
  out.categories = categories;
  out.descriptor = descriptor;
  std::vector<std::size_t> taken(categories.size() * 2, 0);
  for (const Element& e : elements) {
    const std::size_t slot = static_cast<std::size_t>(e.category) * 2 + static_cast<std::size_t>(e.kind);
    const std::size_t cap = e.kind == ElementKind::Discriminative ? n_disc : n_loc;
    if (taken[slot] < cap) {
      ++taken[slot];
      out.elements.push_back(e);
    }
  }
  return out;
}

void write_bank(std::ostream& os, const ElementBank& bank) {
  using namespace binio;
  os.write("MLEB1", 5);
  put_u32(os, static_cast<std::uint32_t>(bank.categories.size()));
  for (const auto& name : bank.categories) put_string(os, name);
  for (std::size_t c = 0; c < bank.categories.size(); ++c) {
    put_u32(os, static_cast<std::uint32_t>(bank.count(static_cast<int>(c), ElementKind::Discriminative)));
    put_u32(os, static_cast<std::uint32_t>(bank.count(static_cast<int>(c), ElementKind::Localization)));
  }
  const DescriptorConfig& d = bank.descriptor;
  put_u32(os, static_cast<std::uint32_t>(d.cell_size));
  put_u32(os, static_cast<std::uint32_t>(d.channels));
  put_u32(os, static_cast<std::uint32_t>(d.template_cells));
  put_f64(os, d.truncation);
  put_u32(os, static_cast<std::uint32_t>(d.scales_per_octave));
  put_u32(os, static_cast<std::uint32_t>(bank.elements.size()));
  for (const Element& e : bank.elements) {
    put_u32(os, e.id);
    put_u32(os, static_cast<std::uint32_t>(e.category));
    put_u8(os, static_cast<std::uint8_t>(e.kind));
    put_f64(os, e.bias);
    for (float w : e.weights) put_f32(os, w);
  }
}

ElementBank read_bank(std::istream& is) {
  using namespace binio;
  expect_magic(is, "MLEB1");
  ElementBank bank;
  const std::uint32_t n_cat = get_u32(is);
  for (std::uint32_t c = 0; c < n_cat; ++c) bank.categories.push_back(get_string(is));
  std::vector<std::uint32_t> counts(n_cat * 2);
  for (auto& v : counts) v = get_u32(is);
  DescriptorConfig& d = bank.descriptor;
  d.cell_size = static_cast<int>(get_u32(is));
  d.channels = static_cast<int>(get_u32(is));
  d.template_cells = static_cast<int>(get_u32(is));
  d.truncation = get_f64(is);
  d.scales_per_octave = static_cast<int>(get_u32(is));
  if (d.channels != kChannels || d.template_cells != kTemplateCells || d.cell_size != kCellSize)
    throw Error(ErrorCode::MalformedInput, "element bank descriptor does not match this build");
  const std::uint32_t n = get_u32(is);
  bank.elements.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Element e;
    e.id = get_u32(is);
    e.category = static_cast<int>(get_u32(is));
    const std::uint8_t kind = get_u8(is);
    if (kind > 1 || e.category >= static_cast<int>(n_cat))
      throw Error(ErrorCode::MalformedInput, "bad element record " + std::to_string(i));
    e.kind = static_cast<ElementKind>(kind);
    e.bias = get_f64(is);
    for (float& w : e.weights) w = get_f32(is);
    bank.elements.push_back(std::move(e));
  }
  for (std::uint32_t c = 0; c < n_cat; ++c) {
    if (bank.count(static_cast<int>(c), ElementKind::Discriminative) != counts[c * 2] ||
        bank.count(static_cast<int>(c), ElementKind::Localization) != counts[c * 2 + 1])
      throw Error(ErrorCode::MalformedInput, "element bank header counts disagree with its records");
  }
  return bank;
}

void write_bank_manifest(std::ostream& os, const ElementBank& bank) {
  os << "# mldetect element bank manifest\n";
  os << "# bank_hash " << binio::hex64(bank_hash(bank)) << "\n";
  os << "# id\tcategory\tkind\tmining_score\n";
  char buf[64];
  for (const Element& e : bank.elements) {
    std::snprintf(buf, sizeof buf, "%.17g", e.mining_score);
    os << e.id << '\t' << bank.categories.at(e.category) << '\t' << to_string(e.kind) << '\t' << buf << '\n';
  }
}

void apply_bank_manifest(std::istream& is, ElementBank& bank) {
  std::string line;
  std::size_t index = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::uint32_t id = 0;
    std::string category, kind;
    double score = 0.0;
    if (!(ls >> id >> category >> kind >> score))
      throw Error(ErrorCode::MalformedInput, "bad bank manifest line: " + line);
    if (index >= bank.elements.size() || bank.elements[index].id != id)
      throw Error(ErrorCode::MalformedInput, "bank manifest does not match bank element order");
    bank.elements[index++].mining_score = score;
  }
}

void save_bank(const std::filesystem::path& path, const ElementBank& bank) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    write_bank(out, bank);
  }
  std::ofstream manifest(path.string() + ".manifest.txt", std::ios::trunc);
  if (!manifest) throw Error(ErrorCode::Io, "cannot write bank manifest next to " + path.string());
  write_bank_manifest(manifest, bank);
}

ElementBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open element bank " + path.string());
  ElementBank bank = read_bank(in);
  std::ifstream manifest(path.string() + ".manifest.txt");
  if (manifest) apply_bank_manifest(manifest, bank);
  return bank;
}

std::uint64_t bank_hash(const ElementBank& bank) {
  std::ostringstream os(std::ios::binary);
  write_bank(os, bank);
  return binio::fnv1a(os.str());
}

}  // namespace mldetect
