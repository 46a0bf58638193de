#pragma once

#include "tunmix/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tunmix::io {

namespace fs = std::filesystem;

// Column stacking: element (l, n) of an L x N matrix lands at index n*L + l.
Vector vectorize(const Matrix& X);
Matrix devectorize(const Vector& x, Index rows, Index cols);

// A list of same-shape matrices stored one file per entry.
struct ArrayGroup {
  std::vector<std::string> files;
  Index rows = 0;
  Index cols = 0;
};

// Contents of manifest.json. `frames` is populated for observed sequences;
// `arrays` holds named groups (abundances, endmembers, psi, m0, ...).
struct Manifest {
  Index L = 0;
  Index N = 0;
  Index T = 0;
  std::optional<Index> P;
  std::string dtype = "float64";
  std::string byte_order = "little";
  std::string layout = "column-major";
  std::vector<std::string> frames;
  std::map<std::string, ArrayGroup> arrays;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<double>> wavelengths;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string frame_file_name(Index t);
// "<prefix>_<t>.f64", zero-padded to four digits.
std::string indexed_file_name(const std::string& prefix, Index t);

void write_manifest(const fs::path& dir, const Manifest& manifest);
Manifest read_manifest(const fs::path& dir);

// Raw little-endian float64 column-major payload, no header.
void write_matrix(const fs::path& file, const Matrix& X);
Matrix read_matrix(const fs::path& file, Index rows, Index cols);

void write_hseq(const HsiSequence& seq, const fs::path& dir,
                std::optional<std::uint64_t> seed = std::nullopt,
                std::optional<Index> endmember_count = std::nullopt);
HsiSequence read_hseq(const fs::path& dir);

// Writes each matrix as `<prefix>_<t>.f64` under dir and returns the group
// description to be stored in a manifest.
ArrayGroup write_group(const fs::path& dir, const std::string& prefix,
                       const std::vector<Matrix>& mats);
std::vector<Matrix> read_group(const fs::path& dir, const ArrayGroup& group);

// Standalone matrix with a `<file>.json` sidecar recording its shape.
void write_matrix_with_shape(const fs::path& file, const Matrix& X);
// Looks up the shape in a sibling manifest's arrays, then in the sidecar.
// Returns nullopt when neither exists.
std::optional<std::pair<Index, Index>> lookup_matrix_shape(const fs::path& file);

}  // namespace tunmix::io
