#pragma once

// Versioned binary model files.
//
// Layout (little-endian):
//   8 bytes   magic "CGPSEMDL"
//   u32       format version
//   u32       model kind (see ModelKind)
//   u32       length of the layout descriptor, followed by its ASCII text
//   u64 x 3   dimensions (meaning depends on kind, listed in the descriptor)
//   f64 x 4   theta1, theta2, theta3, beta (zeros for non-GP models)
//   f64 ...   arrays in column-major order; complex arrays interleave re, im

#include <Eigen/Dense>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "cgpse/baselines.hpp"
#include "cgpse/cgplvm.hpp"
#include "cgpse/error.hpp"
#include "cgpse/gplvm.hpp"

namespace cgpse {

inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class ModelKind : std::uint32_t { gplvm = 0, cgplvm = 1, nmf = 2, dictionary = 3 };

inline std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::gplvm: return "gplvm";
    case ModelKind::cgplvm: return "cgplvm";
    case ModelKind::nmf: return "nmf";
    case ModelKind::dictionary: return "sr";
  }
  return "unknown";
}

using AnyModel = std::variant<GplvmModel, CgplvmModel, NmfBasis, SparseDictionary>;

namespace detail {

static_assert(std::endian::native == std::endian::little, "model files assume little-endian hosts");

inline const char* layout_descriptor(ModelKind k) {
  switch (k) {
    case ModelKind::gplvm:
      return "dims=K,F,M;params=theta1,theta2,theta3,beta;arrays=Z[KxM],Y[FxM];"
             "order=col-major;type=f64-le";
    case ModelKind::cgplvm:
      return "dims=K,F,M;params=theta1,theta2,theta3,beta;arrays=V[KxM],U[FxM];"
             "order=col-major;type=c128-le-interleaved";
    case ModelKind::nmf:
      return "dims=F,R,0;params=unused;arrays=W[FxR];order=col-major;type=f64-le";
    case ModelKind::dictionary:
      return "dims=F,P,dropped;params=unused;arrays=D[FxP];order=col-major;type=f64-le";
  }
  return "";
}

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void matrix(const Eigen::MatrixXd& m) { raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size())); }
  void matrix(const Eigen::MatrixXcd& m) {
    raw(m.data(), sizeof(std::complex<double>) * static_cast<std::size_t>(m.size()));
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  template <typename T>
  T pod() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) fail(ErrorCategory::format, "model file truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  Eigen::MatrixXd real_matrix(std::uint64_t r, std::uint64_t c) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    take(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }
  Eigen::MatrixXcd complex_matrix(std::uint64_t r, std::uint64_t c) {
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    take(m.data(), sizeof(std::complex<double>) * static_cast<std::size_t>(m.size()));
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline void header(Writer& w, ModelKind kind, std::array<std::uint64_t, 3> dims,
                   const KernelParams* p) {
  w.raw("CGPSEMDL", 8);
  w.pod(kModelFormatVersion);
  w.pod(static_cast<std::uint32_t>(kind));
  const std::string layout = layout_descriptor(kind);
  w.pod(static_cast<std::uint32_t>(layout.size()));
  w.raw(layout.data(), layout.size());
  for (auto d : dims) w.pod(d);
  const std::array<double, 4> params =
      p ? std::array<double, 4>{p->theta1, p->theta2, p->theta3, p->beta}
        : std::array<double, 4>{0.0, 0.0, 0.0, 0.0};
  for (double v : params) w.pod(v);
}

}  // namespace detail

inline std::vector<char> serialize_model(const AnyModel& model) {
  detail::Writer w;
  if (const auto* g = std::get_if<GplvmModel>(&model)) {
    detail::header(w, ModelKind::gplvm,
                   {static_cast<std::uint64_t>(g->latent_dim()),
                    static_cast<std::uint64_t>(g->num_bins()),
                    static_cast<std::uint64_t>(g->num_frames())},
                   &g->params());
    w.matrix(g->latents());
    w.matrix(g->data());
  } else if (const auto* c = std::get_if<CgplvmModel>(&model)) {
    detail::header(w, ModelKind::cgplvm,
                   {static_cast<std::uint64_t>(c->latent_dim()),
                    static_cast<std::uint64_t>(c->num_bins()),
                    static_cast<std::uint64_t>(c->num_frames())},
                   &c->params());
    w.matrix(c->latents());
    w.matrix(c->data());
  } else if (const auto* n = std::get_if<NmfBasis>(&model)) {
    detail::header(w, ModelKind::nmf,
                   {static_cast<std::uint64_t>(n->W.rows()), static_cast<std::uint64_t>(n->W.cols()), 0},
                   nullptr);
    w.matrix(n->W);
  } else {
    const auto& d = std::get<SparseDictionary>(model);
    detail::header(w, ModelKind::dictionary,
                   {static_cast<std::uint64_t>(d.D.rows()), static_cast<std::uint64_t>(d.D.cols()),
                    static_cast<std::uint64_t>(d.dropped_frames)},
                   nullptr);
    w.matrix(d.D);
  }
  return w.bytes();
}

inline AnyModel deserialize_model(std::vector<char> bytes) {
  detail::Reader r(std::move(bytes));
  char magic[8];
  r.take(magic, 8);
  if (std::memcmp(magic, "CGPSEMDL", 8) != 0) fail(ErrorCategory::format, "not a model file");
  const auto version = r.pod<std::uint32_t>();
  if (version != kModelFormatVersion) {
    fail(ErrorCategory::format, "model format version mismatch: file has " +
                                    std::to_string(version) + ", expected " +
                                    std::to_string(kModelFormatVersion));
  }
  const auto kind_raw = r.pod<std::uint32_t>();
  if (kind_raw > static_cast<std::uint32_t>(ModelKind::dictionary)) {
    fail(ErrorCategory::format, "unknown model kind tag");
  }
  const auto kind = static_cast<ModelKind>(kind_raw);
  const auto layout_len = r.pod<std::uint32_t>();
  std::string layout(layout_len, '\0');
  r.take(layout.data(), layout_len);
  if (layout != detail::layout_descriptor(kind)) fail(ErrorCategory::format, "unexpected layout header");
  std::array<std::uint64_t, 3> dims{};
  for (auto& d : dims) d = r.pod<std::uint64_t>();
  KernelParams p;
  p.theta1 = r.pod<double>();
  p.theta2 = r.pod<double>();
  p.theta3 = r.pod<double>();
  p.beta = r.pod<double>();

  AnyModel out;
  switch (kind) {
    case ModelKind::gplvm: {
      auto Z = r.real_matrix(dims[0], dims[2]);
      auto Y = r.real_matrix(dims[1], dims[2]);
      out = GplvmModel::assemble(std::move(Y), std::move(Z), p);
      break;
    }
    case ModelKind::cgplvm: {
      auto V = r.complex_matrix(dims[0], dims[2]);
      auto U = r.complex_matrix(dims[1], dims[2]);
      out = CgplvmModel::assemble(std::move(U), std::move(V), p);
      break;
    }
    case ModelKind::nmf:
      out = NmfBasis{r.real_matrix(dims[0], dims[1])};
      break;
    case ModelKind::dictionary:
      out = SparseDictionary{r.real_matrix(dims[0], dims[1]), static_cast<int>(dims[2])};
      break;
  }
  if (!r.done()) fail(ErrorCategory::format, "trailing bytes in model file");
  return out;
}

inline ModelKind kind_of(const AnyModel& m) {
  return static_cast<ModelKind>(m.index());
}

inline void save_model(const std::filesystem::path& path, const AnyModel& model) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write model file: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCategory::io, "write failed: " + path.string());
}

inline AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot open model file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(std::move(bytes));
}

}  // namespace cgpse
