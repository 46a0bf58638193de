#include "tunmix/hseq_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace tunmix {

HsiSequence::HsiSequence(std::vector<Matrix> frames,
                         std::optional<std::vector<double>> wavelengths)
    : frames_(std::move(frames)), wavelengths_(std::move(wavelengths)) {
  if (frames_.empty()) throw InvalidArgument("HsiSequence needs at least one frame");
  const Index L = frames_.front().rows();
  const Index N = frames_.front().cols();
  if (L < 1 || N < 1) throw InvalidArgument("HsiSequence frames must be non-empty");
  for (std::size_t t = 0; t < frames_.size(); ++t) {
    if (frames_[t].rows() != L || frames_[t].cols() != N) {
      std::ostringstream msg;
      msg << "frame " << t << " is " << frames_[t].rows() << "x" << frames_[t].cols()
          << ", expected " << L << "x" << N;
      throw InvalidArgument(msg.str());
    }
    require_finite(frames_[t], "frame " + std::to_string(t));
  }
  if (wavelengths_ && static_cast<Index>(wavelengths_->size()) != L) {
    throw InvalidArgument("wavelength list length does not match band count");
  }
}

GlmmModel::GlmmModel(Matrix M0) : M0_(std::move(M0)) {
  if (M0_.cols() < 2) throw InvalidArgument("GLMM model needs at least two endmembers");
  if (M0_.rows() < 1) throw InvalidArgument("GLMM model needs at least one band");
  require_finite(M0_, "M0");
  if ((M0_.array() < 0.0).any()) throw InvalidArgument("M0 entries must be nonnegative");
  m0_ = Eigen::Map<const Vector>(M0_.data(), M0_.size());
}

void require_finite(const Matrix& X, const std::string& what) {
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      if (!std::isfinite(X(i, j))) {
        std::ostringstream msg;
        msg << what << ": non-finite entry at (" << i << ", " << j << ")";
        throw InvalidArgument(msg.str());
      }
    }
  }
}

}  // namespace tunmix

namespace tunmix::io {

using nlohmann::json;

Vector vectorize(const Matrix& X) { return Eigen::Map<const Vector>(X.data(), X.size()); }

Matrix devectorize(const Vector& x, Index rows, Index cols) {
  if (rows * cols != x.size()) {
    throw InvalidArgument("devectorize: length " + std::to_string(x.size()) +
                          " does not match " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  return Eigen::Map<const Matrix>(x.data(), rows, cols);
}

std::string indexed_file_name(const std::string& prefix, Index t) {
  std::ostringstream name;
  name << prefix << '_' << std::setw(4) << std::setfill('0') << t << ".f64";
  return name.str();
}

std::string frame_file_name(Index t) { return indexed_file_name("frame", t); }

namespace {

json group_to_json(const ArrayGroup& g) {
  return json{{"files", g.files}, {"rows", g.rows}, {"cols", g.cols}};
}

ArrayGroup group_from_json(const json& j) {
  ArrayGroup g;
  g.files = j.at("files").get<std::vector<std::string>>();
  g.rows = j.at("rows").get<Index>();
  g.cols = j.at("cols").get<Index>();
  return g;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed on " + file.string());
}

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

}  // namespace

void write_manifest(const fs::path& dir, const Manifest& m) {
  ensure_directory(dir);
  json j;
  j["format"] = "hseq";
  j["version"] = 1;
  j["dtype"] = m.dtype;
  j["byte_order"] = m.byte_order;
  j["layout"] = m.layout;
  j["L"] = m.L;
  j["N"] = m.N;
  j["T"] = m.T;
  if (m.P) j["P"] = *m.P;
  if (m.seed) j["seed"] = *m.seed;
  if (!m.frames.empty()) j["frames"] = m.frames;
  if (m.wavelengths) j["wavelengths"] = *m.wavelengths;
  if (!m.arrays.empty()) {
    json arrays = json::object();
    for (const auto& [name, group] : m.arrays) arrays[name] = group_to_json(group);
    j["arrays"] = arrays;
  }
  write_json(dir / kManifestName, j);
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path file = dir / kManifestName;
  if (!fs::exists(file)) throw IoError("missing manifest " + file.string());
  const json j = read_json(file);
  Manifest m;
  try {
    m.dtype = j.value("dtype", std::string("float64"));
    m.byte_order = j.value("byte_order", std::string("little"));
    m.layout = j.value("layout", std::string("column-major"));
    m.L = j.at("L").get<Index>();
    m.N = j.at("N").get<Index>();
    m.T = j.at("T").get<Index>();
    if (j.contains("P")) m.P = j.at("P").get<Index>();
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("frames")) m.frames = j.at("frames").get<std::vector<std::string>>();
    if (j.contains("wavelengths")) m.wavelengths = j.at("wavelengths").get<std::vector<double>>();
    if (j.contains("arrays")) {
      for (const auto& [name, g] : j.at("arrays").items()) m.arrays[name] = group_from_json(g);
    }
  } catch (const json::exception& e) {
    throw FormatError("invalid manifest " + file.string() + ": " + e.what());
  }
  if (m.dtype != "float64") throw FormatError("unsupported dtype '" + m.dtype + "'");
  if (m.byte_order != "little") throw FormatError("unsupported byte order '" + m.byte_order + "'");
  if (m.layout != "column-major") throw FormatError("unsupported layout '" + m.layout + "'");
  return m;
}

void write_matrix(const fs::path& file, const Matrix& X) {
  require_finite(X, file.filename().string());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(X.data()),
              static_cast<std::streamsize>(X.size() * sizeof(double)));
  } else {
    for (Index k = 0; k < X.size(); ++k) {
      std::uint64_t bits;
      std::memcpy(&bits, X.data() + k, sizeof bits);
      bits = __builtin_bswap64(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw IoError("write failed on " + file.string());
}

Matrix read_matrix(const fs::path& file, Index rows, Index cols) {
  if (!fs::exists(file)) throw IoError("missing file " + file.string());
  const auto expected = static_cast<std::uintmax_t>(rows * cols) * sizeof(double);
  const auto actual = fs::file_size(file);
  if (actual != expected) {
    std::ostringstream msg;
    msg << file.string() << ": expected " << expected << " bytes (" << rows << "x" << cols
        << " float64), found " << actual;
    throw IoError(msg.str());
  }
  Matrix X(rows, cols);
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  in.read(reinterpret_cast<char*>(X.data()), static_cast<std::streamsize>(expected));
  if (!in) throw IoError("short read on " + file.string());
  if constexpr (std::endian::native != std::endian::little) {
    for (Index k = 0; k < X.size(); ++k) {
      std::uint64_t bits;
      std::memcpy(&bits, X.data() + k, sizeof bits);
      bits = __builtin_bswap64(bits);
      std::memcpy(X.data() + k, &bits, sizeof bits);
    }
  }
  return X;
}

void write_hseq(const HsiSequence& seq, const fs::path& dir, std::optional<std::uint64_t> seed,
                std::optional<Index> endmember_count) {
  ensure_directory(dir);
  Manifest m;
  m.L = seq.bands();
  m.N = seq.pixels();
  m.T = seq.frame_count();
  m.P = endmember_count;
  m.seed = seed;
  m.wavelengths = seq.wavelengths();
  for (Index t = 0; t < seq.frame_count(); ++t) {
    m.frames.push_back(frame_file_name(t));
    try {
      write_matrix(dir / m.frames.back(), seq.frame(t));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("frame " + std::to_string(t) + ": " + e.what());
    }
  }
  write_manifest(dir, m);
}

HsiSequence read_hseq(const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  if (m.L < 1 || m.N < 1 || m.T < 1) throw FormatError("manifest declares an empty sequence");
  if (static_cast<Index>(m.frames.size()) != m.T) {
    std::ostringstream msg;
    msg << "manifest declares T=" << m.T << " but lists " << m.frames.size() << " frame files";
    throw FormatError(msg.str());
  }
  std::vector<Matrix> frames;
  frames.reserve(static_cast<std::size_t>(m.T));
  for (Index t = 0; t < m.T; ++t) {
    const fs::path file = dir / m.frames[static_cast<std::size_t>(t)];
    if (!fs::exists(file)) {
      throw IoError("missing frame " + std::to_string(t) + " (" + file.string() + ")");
    }
    frames.push_back(read_matrix(file, m.L, m.N));
  }
  return HsiSequence(std::move(frames), m.wavelengths);
}

ArrayGroup write_group(const fs::path& dir, const std::string& prefix,
                       const std::vector<Matrix>& mats) {
  ensure_directory(dir);
  ArrayGroup g;
  if (!mats.empty()) {
    g.rows = mats.front().rows();
    g.cols = mats.front().cols();
  }
  for (std::size_t t = 0; t < mats.size(); ++t) {
    if (mats[t].rows() != g.rows || mats[t].cols() != g.cols) {
      throw InvalidArgument("write_group: mixed shapes in group " + prefix);
    }
    g.files.push_back(indexed_file_name(prefix, static_cast<Index>(t)));
    write_matrix(dir / g.files.back(), mats[t]);
  }
  return g;
}

std::vector<Matrix> read_group(const fs::path& dir, const ArrayGroup& group) {
  std::vector<Matrix> out;
  out.reserve(group.files.size());
  for (const auto& f : group.files) out.push_back(read_matrix(dir / f, group.rows, group.cols));
  return out;
}

void write_matrix_with_shape(const fs::path& file, const Matrix& X) {
  if (file.has_parent_path()) ensure_directory(file.parent_path());
  write_matrix(file, X);
  fs::path sidecar = file;
  sidecar += ".json";
  write_json(sidecar, json{{"rows", X.rows()}, {"cols", X.cols()}, {"dtype", "float64"},
                           {"byte_order", "little"}, {"layout", "column-major"}});
}

std::optional<std::pair<Index, Index>> lookup_matrix_shape(const fs::path& file) {
  const fs::path dir = file.has_parent_path() ? file.parent_path() : fs::path(".");
  if (fs::exists(dir / kManifestName)) {
    try {
      const Manifest m = read_manifest(dir);
      for (const auto& [name, g] : m.arrays) {
        if (std::find(g.files.begin(), g.files.end(), file.filename().string()) != g.files.end()) {
          return std::make_pair(g.rows, g.cols);
        }
      }
    } catch (const Error&) {
      // Fall through to the sidecar.
    }
  }
  fs::path sidecar = file;
  sidecar += ".json";
  if (fs::exists(sidecar)) {
    const json j = read_json(sidecar);
    try {
      return std::make_pair(j.at("rows").get<Index>(), j.at("cols").get<Index>());
    } catch (const json::exception& e) {
      throw FormatError("invalid shape sidecar " + sidecar.string() + ": " + e.what());
    }
  }
  return std::nullopt;
}

}  // namespace tunmix::io
