#include "focus/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "focus/error.hpp"

namespace focus {

static_assert(std::endian::native == std::endian::little,
              "container encoding assumes a little-endian host");

namespace {

template <typename T>
void append(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T read(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw ParseError(std::string("container truncated while reading ") + what + " at byte " +
                       std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType t) { return t == DType::kF32 ? 4 : 8; }

}  // namespace

std::uint64_t ContainerEntry::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void Container::put(ContainerEntry entry) {
  if (contains(entry.name)) throw ContractError("container: duplicate entry '" + entry.name + "'");
  entries_.push_back(std::move(entry));
}

void Container::put_matrix(const std::string& name, const MatrixXd& m, DType dtype) {
  ContainerEntry e;
  e.name = name;
  e.dtype = dtype;
  e.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  switch (dtype) {
    case DType::kF64: e.f64.assign(rm.data(), rm.data() + rm.size()); break;
    case DType::kF32:
      for (Index i = 0; i < rm.size(); ++i) e.f32.push_back(static_cast<float>(rm.data()[i]));
      break;
    case DType::kI64:
      for (Index i = 0; i < rm.size(); ++i) e.i64.push_back(static_cast<std::int64_t>(rm.data()[i]));
      break;
  }
  put(std::move(e));
}

void Container::put_scalar(const std::string& name, double v) {
  ContainerEntry e;
  e.name = name;
  e.f64 = {v};
  put(std::move(e));
}

void Container::put_integer(const std::string& name, std::int64_t v) {
  ContainerEntry e;
  e.name = name;
  e.dtype = DType::kI64;
  e.i64 = {v};
  put(std::move(e));
}

bool Container::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const ContainerEntry& Container::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw ParseError("container has no entry '" + name + "'");
}

MatrixXd Container::matrix(const std::string& name) const {
  const auto& e = at(name);
  if (e.dims.size() != 2) throw ParseError("entry '" + name + "' is not a matrix");
  const auto rows = static_cast<Index>(e.dims[0]);
  const auto cols = static_cast<Index>(e.dims[1]);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  for (Index i = 0; i < rm.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    rm.data()[i] = e.dtype == DType::kF64   ? e.f64[u]
                   : e.dtype == DType::kF32 ? static_cast<double>(e.f32[u])
                                            : static_cast<double>(e.i64[u]);
  }
  return rm;
}

double Container::scalar(const std::string& name) const {
  const auto& e = at(name);
  if (e.element_count() != 1) throw ParseError("entry '" + name + "' is not a scalar");
  if (e.dtype == DType::kF64) return e.f64[0];
  if (e.dtype == DType::kF32) return e.f32[0];
  return static_cast<double>(e.i64[0]);
}

std::int64_t Container::integer(const std::string& name) const {
  const auto& e = at(name);
  if (e.element_count() != 1 || e.dtype != DType::kI64)
    throw ParseError("entry '" + name + "' is not an i64 scalar");
  return e.i64[0];
}

std::string Container::serialize() const {
  std::string out = "FOCS";
  append<std::uint32_t>(out, kVersion);
  append<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    append<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    append<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    append<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) append<std::uint64_t>(out, d);
    const auto n = e.element_count();
    switch (e.dtype) {
      case DType::kF64:
        if (e.f64.size() != n) throw ContractError("entry '" + e.name + "' payload/dims mismatch");
        for (double v : e.f64) append(out, v);
        break;
      case DType::kF32:
        if (e.f32.size() != n) throw ContractError("entry '" + e.name + "' payload/dims mismatch");
        for (float v : e.f32) append(out, v);
        break;
      case DType::kI64:
        if (e.i64.size() != n) throw ContractError("entry '" + e.name + "' payload/dims mismatch");
        for (std::int64_t v : e.i64) append(out, v);
        break;
    }
  }
  return out;
}

Container Container::parse(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != "FOCS") throw ParseError("not a FOCS container (bad magic)");
  const auto version = r.read<std::uint32_t>("version");
  if (version != kVersion)
    throw ParseError("unsupported container version " + std::to_string(version));
  const auto count = r.read<std::uint32_t>("entry count");

  Container c;
  for (std::uint32_t i = 0; i < count; ++i) {
    ContainerEntry e;
    const auto name_len = r.read<std::uint32_t>("name length");
    e.name = std::string(r.take(name_len, "name"));
    const auto code = r.read<std::uint8_t>("dtype");
    if (code > 2) throw ParseError("entry '" + e.name + "' has unknown dtype " + std::to_string(code));
    e.dtype = static_cast<DType>(code);
    const auto rank = r.read<std::uint32_t>("rank");
    for (std::uint32_t k = 0; k < rank; ++k) e.dims.push_back(r.read<std::uint64_t>("dims"));
    const auto n = e.element_count();
    if (n > bytes.size() / dtype_size(e.dtype))
      throw ParseError("entry '" + e.name + "' declares more data than the file holds");
    for (std::uint64_t k = 0; k < n; ++k) {
      switch (e.dtype) {
        case DType::kF64: e.f64.push_back(r.read<double>("payload")); break;
        case DType::kF32: e.f32.push_back(r.read<float>("payload")); break;
        case DType::kI64: e.i64.push_back(r.read<std::int64_t>("payload")); break;
      }
    }
    if (c.contains(e.name)) throw ParseError("duplicate container entry '" + e.name + "'");
    c.entries_.push_back(std::move(e));
  }
  if (!r.done())
    throw ParseError("container has " + std::to_string(bytes.size() - r.pos()) + " trailing bytes");
  return c;
}

void Container::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const auto bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

Container Container::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void put_prototypes(Container& c, const PrototypeSet& protos, const std::string& prefix) {
  c.put_matrix(prefix + "prototypes", protos.prototypes);
  c.put_scalar(prefix + "alpha", protos.alpha);
  c.put_integer(prefix + "p", protos.p());
  c.put_integer(prefix + "k", protos.k());
  c.put_integer(prefix + "seed", static_cast<std::int64_t>(protos.fit_meta.seed));
  c.put_integer(prefix + "fit_iterations", protos.fit_meta.iterations);
  c.put_scalar(prefix + "fit_loss", protos.fit_meta.final_loss);
}

PrototypeSet get_prototypes(const Container& c, const std::string& prefix) {
  PrototypeSet s;
  s.prototypes = c.matrix(prefix + "prototypes");
  s.alpha = c.scalar(prefix + "alpha");
  if (c.integer(prefix + "p") != s.p() || c.integer(prefix + "k") != s.k())
    throw ParseError("prototype scalars p/k disagree with the tensor shape");
  s.fit_meta.seed = static_cast<std::uint64_t>(c.integer(prefix + "seed"));
  if (c.contains(prefix + "fit_iterations"))
    s.fit_meta.iterations = static_cast<int>(c.integer(prefix + "fit_iterations"));
  if (c.contains(prefix + "fit_loss")) s.fit_meta.final_loss = c.scalar(prefix + "fit_loss");
  s.validate();
  return s;
}

void save_prototypes(const std::string& path, const PrototypeSet& protos) {
  Container c;
  put_prototypes(c, protos);
  c.save(path);
}

PrototypeSet load_prototypes(const std::string& path) { return get_prototypes(Container::load(path)); }

Container bundle_to_container(const ModelBundle& b, DType dtype) {
  Container c;
  const auto& hp = b.params.hyper;
  c.put_integer("hyper/p", hp.p);
  c.put_integer("hyper/d", hp.d);
  c.put_integer("hyper/m", hp.m);
  c.put_integer("hyper/k", hp.k);
  c.put_integer("hyper/lookback", hp.lookback);
  c.put_integer("hyper/horizon", hp.horizon);
  c.put_integer("hyper/entities", hp.entities);
  for (const auto& [name, t] : b.params.tensors()) c.put_matrix(name, *t, dtype);
  put_prototypes(c, b.protos, "protos/");
  if (b.norm) {
    c.put_matrix("norm/mean", b.norm->mean.transpose());
    c.put_matrix("norm/std", b.norm->std.transpose());
  }
  c.put_scalar("split/train", b.ratio.train);
  c.put_scalar("split/val", b.ratio.val);
  c.put_scalar("split/test", b.ratio.test);
  return c;
}

ModelBundle bundle_from_container(const Container& c) {
  ModelBundle b;
  auto& hp = b.params.hyper;
  hp.p = c.integer("hyper/p");
  hp.d = c.integer("hyper/d");
  hp.m = c.integer("hyper/m");
  hp.k = c.integer("hyper/k");
  hp.lookback = c.integer("hyper/lookback");
  hp.horizon = c.integer("hyper/horizon");
  hp.entities = c.integer("hyper/entities");
  hp.validate();
  for (auto& [name, t] : b.params.tensors()) *t = c.matrix(name);
  b.params.check_shapes();
  b.protos = get_prototypes(c, "protos/");
  if (c.contains("norm/mean")) {
    NormStats s;
    s.mean = c.matrix("norm/mean").transpose();
    s.std = c.matrix("norm/std").transpose();
    b.norm = std::move(s);
  }
  b.ratio = {c.scalar("split/train"), c.scalar("split/val"), c.scalar("split/test")};
  return b;
}

void save_model(const std::string& path, const ModelBundle& bundle, DType dtype) {
  bundle_to_container(bundle, dtype).save(path);
}

ModelBundle load_model(const std::string& path) { return bundle_from_container(Container::load(path)); }

}  // namespace focus
