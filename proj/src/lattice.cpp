#include "mvhom/lattice.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mvhom/errors.hpp"

namespace mvhom {

namespace {

constexpr char kMagic[8] = {'M', 'V', 'H', 'O', 'M', 'T', 'A', 'B'};

static_assert(std::endian::native == std::endian::little,
              "coefficient tables are stored little endian");

std::size_t table_size(int dim, int points) {
  std::size_t n = 1;
  for (int i = 0; i < dim; ++i) n *= static_cast<std::size_t>(points);
  return n;
}

}  // namespace

Lattice::Lattice(int dim, int points, std::vector<double> values, bool periodic, double lo,
                 double hi)
    : dim_(dim), points_(points), periodic_(periodic), lo_(lo), hi_(hi), values_(std::move(values)) {
  if (dim < 1 || dim > 4) throw Error("lattice dimension must be in [1,4]");
  if (points < 2) throw Error("lattice needs at least two points per axis");
  if (values_.size() != table_size(dim, points)) throw Error("lattice value count mismatch");
  if (!periodic && !(hi > lo)) throw Error("lattice box must have hi > lo");
}

double Lattice::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::array<int, 4> base{};
  std::array<double, 4> frac{};
  for (int a = 0; a < dim_; ++a) {
    double u;
    if (periodic_) {
      u = (x[a] - std::floor(x[a])) * points_;
    } else {
      u = (std::clamp(x[a], lo_, hi_) - lo_) / (hi_ - lo_) * (points_ - 1);
    }
    int i = static_cast<int>(std::floor(u));
    double f = u - i;
    if (periodic_) {
      i %= points_;
    } else if (i >= points_ - 1) {
      i = points_ - 2;
      f = 1.0;
    }
    base[a] = i;
    frac[a] = f;
  }
  // Row-major: the last axis varies fastest.
  double acc = 0.0;
  for (int corner = 0; corner < (1 << dim_); ++corner) {
    double w = 1.0;
    std::size_t idx = 0;
    for (int a = 0; a < dim_; ++a) {
      const int bit = (corner >> a) & 1;
      int i = base[a] + bit;
      if (periodic_) i %= points_;
      w *= bit ? frac[a] : 1.0 - frac[a];
      idx = idx * static_cast<std::size_t>(points_) + static_cast<std::size_t>(i);
    }
    if (w != 0.0) acc += w * values_[idx];
  }
  return acc;
}

Lattice read_coefficient_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open coefficient table " + path.string());
  char magic[8];
  std::uint32_t dim = 0;
  std::uint32_t points = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&points), 4);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("bad coefficient table header in " + path.string());
  }
  if (dim < 1 || dim > 4 || points < 2 || points > (1u << 14)) {
    throw IoError("unsupported coefficient table shape in " + path.string());
  }
  std::vector<double> values(table_size(static_cast<int>(dim), static_cast<int>(points)));
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw IoError("truncated coefficient table " + path.string());
  return Lattice(static_cast<int>(dim), static_cast<int>(points), std::move(values), true);
}

void write_coefficient_table(const std::filesystem::path& path, const Lattice& lattice) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write coefficient table " + path.string());
  const auto dim = static_cast<std::uint32_t>(lattice.dim());
  const auto points = static_cast<std::uint32_t>(lattice.points());
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&points), 4);
  out.write(reinterpret_cast<const char*>(lattice.values().data()),
            static_cast<std::streamsize>(lattice.values().size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace mvhom
