#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string_view>

#include "chstep/spectral_grid.hpp"

namespace chstep {

/// i.i.d. U(-amplitude, amplitude) per grid point, not mean-corrected.
Field random_initial_field(const Grid& grid, std::uint64_t seed, double amplitude = 1e-3);

/// Independent stream seed derived from a master seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Opens `path` for writing, creating parent directories. Throws std::runtime_error on failure.
std::ofstream open_output(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view text);

/// Flat binary snapshot, native byte order:
///   int64 M, float64 L, float64 t, then M*M float64 values with index i*M + j
///   (i along x, j along y).
void write_snapshot_binary(const std::filesystem::path& path, const Grid& grid, double t,
                           const Field& phi);

struct Snapshot {
  int points = 0;
  double length = 0.0;
  double t = 0.0;
  Field phi;
};

Snapshot read_snapshot_binary(const std::filesystem::path& path);

/// CSV snapshot: a "# M=.. L=.. t=.." comment line, then header i,j,x,y,phi.
void write_snapshot_csv(const std::filesystem::path& path, const Grid& grid, double t,
                        const Field& phi);

}  // namespace chstep
