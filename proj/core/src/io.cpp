#include "chstep/io.hpp"

#include <iomanip>
#include <random>
#include <stdexcept>
#include <string>

namespace chstep {

Field random_initial_field(const Grid& grid, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-amplitude, amplitude);
  Field phi(grid.points());
  for (double& x : phi.values()) x = unit(rng);
  return phi;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_snapshot_binary(const std::filesystem::path& path, const Grid& grid, double t,
                           const Field& phi) {
  if (phi.points() != grid.points()) throw std::invalid_argument("snapshot field does not match grid");
  auto out = open_output(path);
  const std::int64_t m = grid.points();
  const double length = grid.length();
  out.write(reinterpret_cast<const char*>(&m), sizeof m);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(reinterpret_cast<const char*>(&t), sizeof t);
  out.write(reinterpret_cast<const char*>(phi.data()),
            static_cast<std::streamsize>(phi.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Snapshot read_snapshot_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::int64_t m = 0;
  Snapshot snap;
  in.read(reinterpret_cast<char*>(&m), sizeof m);
  in.read(reinterpret_cast<char*>(&snap.length), sizeof snap.length);
  in.read(reinterpret_cast<char*>(&snap.t), sizeof snap.t);
  if (!in || m < 4 || m > (1 << 15)) throw std::runtime_error("bad snapshot header in " + path.string());
  snap.points = static_cast<int>(m);
  snap.phi = Field(snap.points);
  in.read(reinterpret_cast<char*>(snap.phi.data()),
          static_cast<std::streamsize>(snap.phi.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated snapshot " + path.string());
  return snap;
}

void write_snapshot_csv(const std::filesystem::path& path, const Grid& grid, double t,
                        const Field& phi) {
  auto out = open_output(path);
  out << std::setprecision(17);
  out << "# M=" << grid.points() << " L=" << grid.length() << " t=" << t << '\n';
  out << "i,j,x,y,phi\n";
  for (int i = 0; i < grid.points(); ++i) {
    for (int j = 0; j < grid.points(); ++j) {
      out << i << ',' << j << ',' << grid.coordinate(i) << ',' << grid.coordinate(j) << ','
          << phi(i, j) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace chstep
