#include "homlab/fields.hpp"

#include "homlab/io.hpp"
#include "homlab/linalg.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>

namespace homlab {

namespace {

// Sub-lattice resolution of the white noise underlying filtered_white_noise.
constexpr int kNoisePerUnit = 8;
// w has unit variance; the clamp maps w / 2 into [-1, 1].
constexpr double kNoiseGain = 0.5;

double scalar_ellipticity(std::initializer_list<double> values) {
  double lambda = 1.0;
  for (double v : values) lambda = std::max({lambda, v, 1.0 / v});
  return lambda;
}

int ipow(int base, int exp) {
  int out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

struct Segment {
  double cx, cy;  // centre
  double ux, uy;  // unit direction
  double half_length;
};

struct CellContent {
  double value = 0.0;
  std::vector<double> points;  // flattened d-vectors
  std::vector<double> noise;   // kNoisePerUnit^d values, axis 0 fastest
  std::vector<Segment> segments;
};

CellContent generate_cell(const CoefficientField& field, std::span<const int> z) {
  CellContent c;
  Engine engine(cell_seed(field.seed(), z));
  const int d = field.dimension();
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, CheckerboardParams>) {
          c.value = uniform01(engine) < p.prob_hi ? p.a_hi : p.a_lo;
        } else if constexpr (std::is_same_v<P, PoissonInclusionParams>) {
          int n = 0;
          if (p.intensity > 0) n = boost::random::poisson_distribution<int, double>(p.intensity)(engine);
          c.points.reserve(static_cast<std::size_t>(n * d));
          for (int k = 0; k < n; ++k)
            for (int i = 0; i < d; ++i) c.points.push_back(z[i] + uniform01(engine));
        } else if constexpr (std::is_same_v<P, WhiteNoiseParams>) {
          boost::random::normal_distribution<double> normal(0.0, 1.0);
          c.noise.resize(static_cast<std::size_t>(ipow(kNoisePerUnit, d)));
          for (auto& v : c.noise) v = normal(engine);
        } else if constexpr (std::is_same_v<P, LineInclusionParams>) {
          int n = 0;
          if (p.intensity > 0) n = boost::random::poisson_distribution<int, double>(p.intensity)(engine);
          for (int k = 0; k < n; ++k) {
            Segment s{};
            s.cx = z[0] + uniform01(engine);
            s.cy = z[1] + uniform01(engine);
            const double angle =
                std::numbers::pi / 2 + p.orientation_spread * (2 * uniform01(engine) - 1);
            s.ux = std::cos(angle);
            s.uy = std::sin(angle);
            s.half_length = 0.5 * p.segment_length;
            c.segments.push_back(s);
          }
        }
      },
      field.params());
  return c;
}

// Calls fn(offset) for every offset in {-1,0,1}^d.
template <typename Fn>
void for_each_neighbor(int d, Fn&& fn) {
  std::vector<int> off(static_cast<std::size_t>(d), -1);
  const int total = ipow(3, d);
  for (int n = 0; n < total; ++n) {
    int t = n;
    for (int i = 0; i < d; ++i) {
      off[i] = t % 3 - 1;
      t /= 3;
    }
    fn(std::span<const int>(off));
  }
}

double segment_distance(const Segment& s, double x, double y) {
  const double dx = x - s.cx;
  const double dy = y - s.cy;
  const double t = std::clamp(dx * s.ux + dy * s.uy, -s.half_length, s.half_length);
  return std::hypot(dx - t * s.ux, dy - t * s.uy);
}

// Scalar coefficient at x for the scalar-valued generators. `lookup(z)`
// returns the content of unit cell z.
template <typename Lookup>
double scalar_value(const CoefficientField& field, std::span<const double> x, Lookup&& lookup) {
  const int d = field.dimension();
  std::vector<int> home(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) home[i] = static_cast<int>(std::floor(x[i]));
  std::vector<int> z(static_cast<std::size_t>(d));

  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, CheckerboardParams>) {
          return lookup(std::span<const int>(home)).value;
        } else if constexpr (std::is_same_v<P, PoissonInclusionParams>) {
          bool inside = false;
          const double r2 = p.radius * p.radius;
          for_each_neighbor(d, [&](std::span<const int> off) {
            if (inside) return;
            for (int i = 0; i < d; ++i) z[i] = home[i] + off[i];
            const auto& pts = lookup(std::span<const int>(z)).points;
            for (std::size_t k = 0; k < pts.size(); k += static_cast<std::size_t>(d)) {
              double dist2 = 0;
              for (int i = 0; i < d; ++i) dist2 += (x[i] - pts[k + i]) * (x[i] - pts[k + i]);
              if (dist2 < r2) {
                inside = true;
                return;
              }
            }
          });
          return inside ? p.a_in : p.a_out;
        } else if constexpr (std::is_same_v<P, WhiteNoiseParams>) {
          if (p.contrast == 0.0) return 1.0;
          double sum = 0, norm2 = 0;
          const double s = p.filter_scale;
          const int per_cell = ipow(kNoisePerUnit, d);
          std::vector<int> sub(static_cast<std::size_t>(d));
          for_each_neighbor(d, [&](std::span<const int> off) {
            for (int i = 0; i < d; ++i) z[i] = home[i] + off[i];
            const auto& noise = lookup(std::span<const int>(z)).noise;
            for (int j = 0; j < per_cell; ++j) {
              int t = j;
              double dist2 = 0;
              for (int i = 0; i < d; ++i) {
                const double y = z[i] + (t % kNoisePerUnit + 0.5) / kNoisePerUnit;
                t /= kNoisePerUnit;
                dist2 += (x[i] - y) * (x[i] - y);
              }
              const double q = dist2 / (s * s);
              if (q >= 1.0) continue;
              const double w = (1 - q) * (1 - q);
              sum += w * noise[static_cast<std::size_t>(j)];
              norm2 += w * w;
            }
          });
          const double w = norm2 > 0 ? sum / std::sqrt(norm2) : 0.0;
          return 1.0 + p.contrast * std::clamp(kNoiseGain * w, -1.0, 1.0);
        } else if constexpr (std::is_same_v<P, LineInclusionParams>) {
          bool inside = false;
          for_each_neighbor(d, [&](std::span<const int> off) {
            if (inside) return;
            for (int i = 0; i < d; ++i) z[i] = home[i] + off[i];
            // Segments are clipped to the 1-neighbourhood of their own cell.
            for (int i = 0; i < d; ++i)
              if (x[i] < z[i] - 1 || x[i] >= z[i] + 2) return;
            for (const auto& seg : lookup(std::span<const int>(z)).segments)
              if (segment_distance(seg, x[0], x[1]) <= 0.5 * p.thickness) {
                inside = true;
                return;
              }
          });
          return inside ? p.a_line : p.a_bg;
        } else {
          return 0.0;  // constant fields never reach here
        }
      },
      field.params());
}

}  // namespace

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::checkerboard: return "checkerboard";
    case FieldKind::poisson_inclusion: return "poisson-inclusion";
    case FieldKind::filtered_white_noise: return "filtered-white-noise";
    case FieldKind::line_inclusion: return "line-inclusion";
    case FieldKind::constant: return "constant";
  }
  return "unknown";
}

FieldKind field_kind_from_string(std::string_view name) {
  for (auto k : {FieldKind::checkerboard, FieldKind::poisson_inclusion,
                 FieldKind::filtered_white_noise, FieldKind::line_inclusion, FieldKind::constant})
    if (to_string(k) == name) return k;
  throw InvalidParameter("unknown field kind '" + std::string(name) + "'");
}

CoefficientField::CoefficientField(int dimension, FieldParams params, Seed seed)
    : d_(dimension), params_(std::move(params)), seed_(seed), lambda_(1.0) {
  if (d_ < 1 || d_ > 3) throw InvalidParameter("dimension must be 1, 2 or 3");
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, CheckerboardParams>) {
          if (!(p.a_lo > 0) || !(p.a_hi >= p.a_lo))
            throw InvalidParameter("checkerboard needs 0 < a_lo <= a_hi");
          if (!(p.prob_hi >= 0 && p.prob_hi <= 1))
            throw InvalidParameter("checkerboard prob_hi must lie in [0, 1]");
          lambda_ = scalar_ellipticity({p.a_lo, p.a_hi});
        } else if constexpr (std::is_same_v<P, PoissonInclusionParams>) {
          if (!(p.radius > 0 && p.radius <= 0.5))
            throw InvalidParameter("poisson-inclusion radius must lie in (0, 1/2]");
          if (!(p.a_in > 0 && p.a_out > 0))
            throw InvalidParameter("poisson-inclusion conductivities must be positive");
          if (!(p.intensity >= 0)) throw InvalidParameter("intensity must be nonnegative");
          lambda_ = scalar_ellipticity({p.a_in, p.a_out});
        } else if constexpr (std::is_same_v<P, WhiteNoiseParams>) {
          if (!(p.contrast >= 0 && p.contrast < 1))
            throw InvalidParameter("filtered-white-noise contrast must lie in [0, 1)");
          if (!(p.filter_scale > 0 && p.filter_scale <= 0.5))
            throw InvalidParameter("filtered-white-noise filter_scale must lie in (0, 1/2]");
          lambda_ = scalar_ellipticity({1 + p.contrast, 1 - p.contrast});
        } else if constexpr (std::is_same_v<P, LineInclusionParams>) {
          if (d_ != 2) throw InvalidParameter("line-inclusion fields are two-dimensional");
          if (!(p.a_line > 0 && p.a_bg > 0))
            throw InvalidParameter("line-inclusion conductivities must be positive");
          if (!(p.thickness > 0 && p.thickness <= 0.5))
            throw InvalidParameter("line-inclusion thickness must lie in (0, 1/2]");
          if (!(p.intensity >= 0)) throw InvalidParameter("intensity must be nonnegative");
          lambda_ = scalar_ellipticity({p.a_line, p.a_bg});
        } else {
          if (p.tensor.rows() != d_ || p.tensor.cols() != d_)
            throw InvalidParameter("constant tensor has the wrong shape");
          if (!p.tensor.isApprox(p.tensor.transpose()))
            throw InvalidParameter("constant tensor must be symmetric");
          const double lo = min_eigenvalue(p.tensor);
          if (!(lo > 0)) throw InvalidParameter("constant tensor must be positive definite");
          lambda_ = std::max({1.0, max_eigenvalue(p.tensor), 1.0 / lo});
        }
      },
      params_);
}

FieldKind CoefficientField::kind() const noexcept {
  return static_cast<FieldKind>(params_.index());
}

double CoefficientField::dependence_range() const noexcept {
  switch (kind()) {
    case FieldKind::line_inclusion: return 3.0;
    case FieldKind::constant: return 0.0;
    default: return 1.0;
  }
}

MatrixXd CoefficientField::tensor_at(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != d_) throw InvalidParameter("point has the wrong dimension");
  if (const auto* c = std::get_if<ConstantParams>(&params_)) return c->tensor;
  std::map<std::vector<int>, CellContent> cache;
  auto lookup = [&](std::span<const int> z) -> const CellContent& {
    std::vector<int> key(z.begin(), z.end());
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, generate_cell(*this, z)).first;
    return it->second;
  };
  return scalar_value(*this, x, lookup) * MatrixXd::Identity(d_, d_);
}

CoefficientField gen_checkerboard(int d, double a_lo, double a_hi, double prob_hi, Seed seed) {
  return {d, CheckerboardParams{a_lo, a_hi, prob_hi}, seed};
}

CoefficientField gen_poisson_inclusions(int d, double intensity, double radius, double a_in,
                                        double a_out, Seed seed) {
  return {d, PoissonInclusionParams{intensity, radius, a_in, a_out}, seed};
}

CoefficientField gen_filtered_white_noise(int d, double filter_scale, double contrast, Seed seed) {
  return {d, WhiteNoiseParams{filter_scale, contrast}, seed};
}

CoefficientField gen_line_inclusions(double intensity, double segment_length, double thickness,
                                     double a_line, double a_bg, double orientation_spread,
                                     Seed seed) {
  return {2,
          LineInclusionParams{intensity, segment_length, thickness, a_line, a_bg,
                              orientation_spread},
          seed};
}

CoefficientField gen_constant(const MatrixXd& tensor) {
  return {static_cast<int>(tensor.rows()), ConstantParams{tensor}, 0};
}

CoefficientField gen_constant(int d, double c) {
  return gen_constant(c * MatrixXd::Identity(d, d));
}

Cube Cube::centered(int d, int side) {
  return {std::vector<int>(static_cast<std::size_t>(d), -(side / 2)), side};
}

Cube Cube::at_origin(int d, int side) {
  return {std::vector<int>(static_cast<std::size_t>(d), 0), side};
}

// ---------------------------------------------------------------------------

CellTensorGrid::CellTensorGrid(int dimension, int side, int cells_per_unit,
                               std::vector<int> corner, MatrixXd packed_tensors, Seed seed,
                               FieldKind kind)
    : d_(dimension), side_(side), m_(cells_per_unit), corner_(std::move(corner)),
      packed_(std::move(packed_tensors)), seed_(seed), kind_(kind) {
  if (d_ < 1 || d_ > 3) throw InvalidParameter("dimension must be 1, 2 or 3");
  if (side_ < 1) throw InvalidParameter("cube side must be a positive integer");
  if (m_ < 1) throw InvalidParameter("cells per unit must be positive");
  if (static_cast<int>(corner_.size()) != d_) throw InvalidParameter("corner has wrong dimension");
  Index expected = 1;
  for (int i = 0; i < d_; ++i) expected *= cells_per_axis();
  if (packed_.rows() != packed_size(d_) || packed_.cols() != expected)
    throw InvalidParameter("tensor array does not match the grid shape");
}

CellTensorGrid CellTensorGrid::uniform(const Cube& cube, int cells_per_unit, const MatrixXd& tensor) {
  const int d = static_cast<int>(cube.corner.size());
  Index n = 1;
  for (int i = 0; i < d; ++i) n *= static_cast<Index>(cube.side) * cells_per_unit;
  MatrixXd packed = pack_symmetric(tensor).replicate(1, n);
  return {d, cube.side, cells_per_unit, cube.corner, std::move(packed)};
}

MatrixXd CellTensorGrid::tensor(Index cell) const {
  return unpack_symmetric(packed_.col(cell), d_);
}

std::vector<int> CellTensorGrid::cell_coords(Index cell) const {
  std::vector<int> c(static_cast<std::size_t>(d_));
  const Index n = cells_per_axis();
  for (int i = 0; i < d_; ++i) {
    c[i] = static_cast<int>(cell % n);
    cell /= n;
  }
  return c;
}

Index CellTensorGrid::cell_index(std::span<const int> coords) const {
  Index idx = 0;
  const Index n = cells_per_axis();
  for (int i = d_ - 1; i >= 0; --i) idx = idx * n + coords[i];
  return idx;
}

VectorXd CellTensorGrid::cell_center(Index cell) const {
  const auto c = cell_coords(cell);
  VectorXd x(d_);
  for (int i = 0; i < d_; ++i) x(i) = corner_[i] + (c[i] + 0.5) * h();
  return x;
}

CellTensorGrid CellTensorGrid::subgrid(std::span<const int> unit_offset, int side) const {
  if (static_cast<int>(unit_offset.size()) != d_)
    throw InvalidParameter("subgrid offset has wrong dimension");
  for (int i = 0; i < d_; ++i)
    if (unit_offset[i] < 0 || unit_offset[i] + side > side_)
      throw InvalidParameter("subgrid does not fit inside the parent cube");
  std::vector<int> corner(corner_);
  for (int i = 0; i < d_; ++i) corner[i] += unit_offset[i];
  const Index n = static_cast<Index>(side) * m_;
  Index count = 1;
  for (int i = 0; i < d_; ++i) count *= n;
  MatrixXd packed(packed_.rows(), count);
  std::vector<int> local(static_cast<std::size_t>(d_)), global(static_cast<std::size_t>(d_));
  for (Index c = 0; c < count; ++c) {
    Index t = c;
    for (int i = 0; i < d_; ++i) {
      local[i] = static_cast<int>(t % n);
      t /= n;
      global[i] = local[i] + unit_offset[i] * m_;
    }
    packed.col(c) = packed_.col(cell_index(global));
  }
  return {d_, side, m_, std::move(corner), std::move(packed), seed_, kind_};
}

MatrixXd CellTensorGrid::arithmetic_mean() const {
  return unpack_symmetric(VectorXd(packed_.rowwise().mean()), d_);
}

MatrixXd CellTensorGrid::harmonic_mean() const {
  MatrixXd sum = MatrixXd::Zero(d_, d_);
  for (Index c = 0; c < cell_count(); ++c) sum += tensor(c).inverse();
  return (sum / static_cast<double>(cell_count())).inverse();
}

double CellTensorGrid::ellipticity() const {
  double lambda = 1.0;
  for (Index c = 0; c < cell_count(); ++c) {
    const MatrixXd a = tensor(c);
    lambda = std::max({lambda, max_eigenvalue(a), 1.0 / min_eigenvalue(a)});
  }
  return lambda;
}

CellTensorGrid sample_on_grid(const CoefficientField& field, const Cube& cube, int m) {
  const int d = field.dimension();
  if (static_cast<int>(cube.corner.size()) != d)
    throw InvalidParameter("cube dimension does not match the field");
  if (cube.side < 1) throw InvalidParameter("cube side must be a positive integer");
  if (m < 1) throw InvalidParameter("cells per unit must be positive");

  const int n = cube.side * m;
  Index count = 1;
  for (int i = 0; i < d; ++i) count *= n;

  if (const auto* c = std::get_if<ConstantParams>(&field.params())) {
    return {d, cube.side, m, cube.corner, pack_symmetric(c->tensor).replicate(1, count),
            field.seed(), field.kind()};
  }

  // Unit-cell contents over the cube padded by one cell on every side.
  const int padded = cube.side + 2;
  Index padded_count = 1;
  for (int i = 0; i < d; ++i) padded_count *= padded;
  std::vector<CellContent> contents(static_cast<std::size_t>(padded_count));
  std::vector<int> z(static_cast<std::size_t>(d));
  for (Index k = 0; k < padded_count; ++k) {
    Index t = k;
    for (int i = 0; i < d; ++i) {
      z[i] = cube.corner[i] - 1 + static_cast<int>(t % padded);
      t /= padded;
    }
    contents[static_cast<std::size_t>(k)] = generate_cell(field, z);
  }
  auto lookup = [&](std::span<const int> zz) -> const CellContent& {
    Index k = 0;
    for (int i = d - 1; i >= 0; --i) k = k * padded + (zz[i] - cube.corner[i] + 1);
    return contents[static_cast<std::size_t>(k)];
  };

  const int np = packed_size(d);
  MatrixXd packed = MatrixXd::Zero(np, count);
  std::vector<double> x(static_cast<std::size_t>(d));
  const double h = 1.0 / m;
  for (Index c = 0; c < count; ++c) {
    Index t = c;
    for (int i = 0; i < d; ++i) {
      x[i] = cube.corner[i] + (static_cast<double>(t % n) + 0.5) * h;
      t /= n;
    }
    const double value = scalar_value(field, x, lookup);
    // Diagonal positions of the packed upper triangle.
    int k = 0;
    for (int i = 0; i < d; ++i) {
      packed(k, c) = value;
      k += d - i;
    }
  }
  return {d, cube.side, m, cube.corner, std::move(packed), field.seed(), field.kind()};
}

// ---------------------------------------------------------------------------
// Export formats (see docs/formats.md).

namespace {

constexpr char kGridMagic[8] = {'H', 'L', 'G', 'R', 'I', 'D', '0', '1'};


std::string entry_name(int i, int j) {
  return "a" + std::to_string(i + 1) + std::to_string(j + 1);
}

}  // namespace

void write_grid_csv(std::ostream& out, const CellTensorGrid& grid) {
  const int d = grid.dimension();
  out << "#schema=" << kSchemaVersion << '\n';
  out << "#d=" << d << ",r=" << grid.side() << ",m=" << grid.cells_per_unit()
      << ",seed=" << grid.seed() << ",kind=" << to_string(grid.kind()) << ",corner=";
  for (int i = 0; i < d; ++i) out << (i ? " " : "") << grid.corner()[i];
  out << '\n';
  out << "cell";
  for (int i = 0; i < d; ++i) out << ",i" << i;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) out << ',' << entry_name(i, j);
  out << '\n';
  for (Index c = 0; c < grid.cell_count(); ++c) {
    out << c;
    for (int ci : grid.cell_coords(c)) out << ',' << ci;
    for (Index k = 0; k < grid.packed().rows(); ++k) out << ',' << format_double(grid.packed()(k, c));
    out << '\n';
  }
}

CellTensorGrid read_grid_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  require_schema(t, "grid CSV");
  if (t.comments.empty()) throw ConfigError("grid CSV lacks its metadata line");
  const auto meta = parse_metadata(t.comments.front());
  const int d = static_cast<int>(parse_int(metadata_at(meta, "d")));
  const int r = static_cast<int>(parse_int(metadata_at(meta, "r")));
  const int m = static_cast<int>(parse_int(metadata_at(meta, "m")));
  const Seed seed = parse_uint64(metadata_at(meta, "seed"));
  const FieldKind kind = field_kind_from_string(metadata_at(meta, "kind"));
  std::vector<int> corner;
  for (const auto& c : split(metadata_at(meta, "corner"), ' '))
    corner.push_back(static_cast<int>(parse_int(c)));
  const int np = packed_size(d);
  MatrixXd packed(np, static_cast<Index>(t.rows.size()));
  for (std::size_t row = 0; row < t.rows.size(); ++row) {
    const auto& cols = t.rows[row];
    if (static_cast<int>(cols.size()) != 1 + d + np) throw ConfigError("bad grid CSV row");
    for (int k = 0; k < np; ++k) packed(k, static_cast<Index>(row)) = parse_double(cols[1 + d + k]);
  }
  return {d, r, m, corner, std::move(packed), seed, kind};
}

void write_grid_binary(std::ostream& out, const CellTensorGrid& grid) {
  out.write(kGridMagic, sizeof kGridMagic);
  write_binary<std::uint32_t>(out, kSchemaVersion);
  write_binary<std::int32_t>(out, grid.dimension());
  write_binary<std::int32_t>(out, grid.side());
  write_binary<std::int32_t>(out, grid.cells_per_unit());
  for (int c : grid.corner()) write_binary<std::int32_t>(out, c);
  write_binary<std::uint64_t>(out, grid.seed());
  write_binary<std::uint32_t>(out, static_cast<std::uint32_t>(grid.kind()));
  for (Index c = 0; c < grid.cell_count(); ++c)
    for (Index k = 0; k < grid.packed().rows(); ++k) write_binary<double>(out, grid.packed()(k, c));
}

CellTensorGrid read_grid_binary(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kGridMagic, sizeof magic) != 0)
    throw ConfigError("not a binary grid file");
  const auto schema = read_binary<std::uint32_t>(in, "binary grid");
  if (schema != kSchemaVersion)
    throw ConfigError("binary grid schema " + std::to_string(schema) + ", expected " +
                      std::to_string(kSchemaVersion));
  const int d = read_binary<std::int32_t>(in, "binary grid");
  const int r = read_binary<std::int32_t>(in, "binary grid");
  const int m = read_binary<std::int32_t>(in, "binary grid");
  if (d < 1 || d > 3) throw ConfigError("binary grid has invalid dimension");
  std::vector<int> corner(static_cast<std::size_t>(d));
  for (auto& c : corner) c = read_binary<std::int32_t>(in, "binary grid");
  const auto seed = read_binary<std::uint64_t>(in, "binary grid");
  const auto kind = static_cast<FieldKind>(read_binary<std::uint32_t>(in, "binary grid"));
  Index count = 1;
  for (int i = 0; i < d; ++i) count *= static_cast<Index>(r) * m;
  MatrixXd packed(packed_size(d), count);
  for (Index c = 0; c < count; ++c)
    for (Index k = 0; k < packed.rows(); ++k) packed(k, c) = read_binary<double>(in, "binary grid");
  return {d, r, m, corner, std::move(packed), seed, kind};
}

}  // namespace homlab
