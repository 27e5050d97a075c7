#include "coordfree/artifacts.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace coordfree {

static_assert(std::endian::native == std::endian::little, "containers are written in native little-endian order");

namespace {

constexpr std::size_t kMagicSize = 8;

class ByteWriter {
 public:
  explicit ByteWriter(const char* magic) {
    char m[kMagicSize] = {};
    std::memcpy(m, magic, std::strlen(magic));
    raw(m, kMagicSize);
    u32(kArtifactVersion);
  }

  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void digest(const Digest& d) { raw(d.data(), d.size()); }

  void grid(const UniformGrid& g) {
    u32(static_cast<std::uint32_t>(g.dim()));
    for (std::size_t d = 0; d < g.dim(); ++d) {
      f64(g.lower()[d]);
      f64(g.upper()[d]);
      f64(g.eta()[d]);
    }
  }
  void space(const FactoredInputSpace& s) {
    u32(static_cast<std::uint32_t>(s.num_components()));
    for (const auto& c : s.components()) grid(c);
  }
  void partition(const Partition& p) {
    u32(static_cast<std::uint32_t>(p.num_components()));
    for (auto c : p.assignment()) u32(static_cast<std::uint32_t>(c));
  }
  void set(const IndexSet& s) {
    u64(s.universe());
    u64(s.words().size());
    raw(s.words().data(), s.words().size() * 8);
  }

  Digest finish(const std::filesystem::path& path) {
    const Digest h = sha256(buf_);
    digest(h);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
    return h;
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::filesystem::path& path, const char* magic) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open file");
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buf_.size() < kMagicSize + 4 + 32) fail("file too short");
    char m[kMagicSize] = {};
    std::memcpy(m, magic, std::strlen(magic));
    if (std::memcmp(buf_.data(), m, kMagicSize) != 0) fail(std::string("not a ") + magic + " container");
    end_ = buf_.size() - 32;
    std::memcpy(hash_.data(), buf_.data() + end_, 32);
    if (sha256(std::span<const std::uint8_t>(buf_.data(), end_)) != hash_) fail("content hash mismatch (corrupt file)");
    pos_ = kMagicSize;
    if (const auto v = u32(); v != kArtifactVersion)
      fail("unsupported container version " + std::to_string(v));
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError("artifact '" + path_ + "': " + what); }

  void raw(void* p, std::size_t n) {
    if (n > end_ - pos_) fail("truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (n > end_ - pos_) fail("truncated string");
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Digest digest() {
    Digest d;
    raw(d.data(), d.size());
    return d;
  }
  std::size_t length(std::size_t elem_size) {
    const auto n = u64();
    if (n > (end_ - pos_) / elem_size) fail("array length exceeds file size");
    return static_cast<std::size_t>(n);
  }

  UniformGrid grid() {
    const auto dim = u32();
    if (dim == 0 || dim > static_cast<std::uint32_t>(kMaxDim)) fail("bad grid dimension");
    std::vector<double> lo(dim), hi(dim), eta(dim);
    for (std::uint32_t d = 0; d < dim; ++d) {
      lo[d] = f64();
      hi[d] = f64();
      eta[d] = f64();
    }
    try {
      return UniformGrid(lo, hi, eta);
    } catch (const DomainError& e) {
      fail(std::string("bad grid: ") + e.what());
    }
  }
  FactoredInputSpace space() {
    const auto n = u32();
    if (n == 0 || n > 64) fail("bad input component count");
    std::vector<UniformGrid> comps;
    for (std::uint32_t i = 0; i < n; ++i) comps.push_back(grid());
    return FactoredInputSpace(std::move(comps));
  }
  Partition partition() {
    const auto n = u32();
    if (n == 0 || n > 64) fail("bad partition size");
    std::vector<std::size_t> cls(n);
    for (auto& c : cls) c = u32();
    try {
      return Partition(cls);
    } catch (const DomainError& e) {
      fail(std::string("bad partition: ") + e.what());
    }
  }
  IndexSet set() {
    const auto universe = u64();
    const auto nwords = length(8);
    if (nwords != (universe + 63) / 64) fail("set word count does not match universe");
    IndexSet s(static_cast<std::size_t>(universe));
    raw(s.words().data(), nwords * 8);
    if (universe % 64 && nwords && (s.words()[nwords - 1] >> (universe % 64)))
      fail("set has members outside its universe");
    return s;
  }

  const Digest& hash() const { return hash_; }
  void done() const {
    if (pos_ != end_) fail("trailing bytes");
  }

 private:
  std::string path_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0, end_ = 0;
  Digest hash_{};
};

}  // namespace

Digest write_system(const std::filesystem::path& path, const SystemArtifact& a) {
  ByteWriter w("CFSYS");
  w.str(a.scenario_name);
  w.str(a.scenario_digest);
  w.f64(a.tau);
  w.grid(a.ts.state_grid());
  w.space(a.ts.input_space());
  w.partition(a.partition);
  w.set(a.safe);
  w.u64(a.ts.shapes().size());
  w.raw(a.ts.shapes().data(), a.ts.shapes().size() * 4);
  w.u64(a.ts.table().size());
  w.raw(a.ts.table().data(), a.ts.table().size() * 4);
  return w.finish(path);
}

SystemArtifact read_system(const std::filesystem::path& path) {
  ByteReader r(path, "CFSYS");
  SystemArtifact a;
  a.scenario_name = r.str();
  a.scenario_digest = r.str();
  a.tau = r.f64();
  UniformGrid grid = r.grid();
  FactoredInputSpace space = r.space();
  a.partition = r.partition();
  if (a.partition.num_components() != space.num_components()) r.fail("partition does not match input space");
  a.safe = r.set();
  if (a.safe.universe() != grid.size()) r.fail("safe set does not match state grid");
  std::vector<std::int32_t> shapes(r.length(4));
  r.raw(shapes.data(), shapes.size() * 4);
  std::vector<std::uint32_t> table(r.length(4));
  r.raw(table.data(), table.size() * 4);
  r.done();
  try {
    a.ts = TransitionSystem(std::move(grid), std::move(space), std::move(shapes), std::move(table));
  } catch (const DomainError& e) {
    r.fail(std::string("bad transition table: ") + e.what());
  }
  a.content_hash = r.hash();
  return a;
}

Digest write_controller(const std::filesystem::path& path, const ControllerArtifact& a) {
  ByteWriter w("CFCTL");
  w.digest(a.system_hash);
  w.u64(a.controller.num_states());
  w.u64(a.controller.num_inputs());
  for (std::size_t x = 0; x < a.controller.num_states(); ++x) {
    const auto words = a.controller.at(static_cast<StateIndex>(x)).words();
    w.raw(words.data(), words.size() * 8);
  }
  return w.finish(path);
}

ControllerArtifact read_controller(const std::filesystem::path& path) {
  ByteReader r(path, "CFCTL");
  ControllerArtifact a;
  a.system_hash = r.digest();
  const auto nstates = r.u64();
  const auto ninputs = r.u64();
  if (ninputs == 0 || ninputs > 0xFFFFFFFFull || nstates > 0xFFFFFFFFull) r.fail("bad controller dimensions");
  a.controller = Controller(static_cast<std::size_t>(nstates), static_cast<std::size_t>(ninputs));
  const std::size_t nwords = static_cast<std::size_t>((ninputs + 63) / 64);
  for (std::size_t x = 0; x < nstates; ++x) {
    InputSet s(static_cast<std::size_t>(ninputs));
    r.raw(s.words().data(), nwords * 8);
    if (ninputs % 64 && (s.words()[nwords - 1] >> (ninputs % 64))) r.fail("controller entry outside input space");
    a.controller.set(static_cast<StateIndex>(x), std::move(s));
  }
  r.done();
  a.content_hash = r.hash();
  return a;
}

Digest write_layers(const std::filesystem::path& path, const LayersArtifact& a) {
  ByteWriter w("CFLAY");
  w.digest(a.system_hash);
  w.digest(a.controller_hash);
  w.partition(a.partition);
  w.f64(a.tau);
  w.grid(a.grid);
  w.u64(a.layers.fixed_point());
  w.u64(a.layers.num_states());
  w.raw(a.layers.labels().data(), a.layers.labels().size() * 4);
  return w.finish(path);
}

LayersArtifact read_layers(const std::filesystem::path& path) {
  ByteReader r(path, "CFLAY");
  LayersArtifact a;
  a.system_hash = r.digest();
  a.controller_hash = r.digest();
  a.partition = r.partition();
  a.tau = r.f64();
  a.grid = r.grid();
  const auto f = r.u64();
  std::vector<std::int32_t> labels(r.length(4));
  r.raw(labels.data(), labels.size() * 4);
  r.done();
  if (labels.size() != a.grid.size()) r.fail("layer labels do not match the grid");
  try {
    a.layers = LayerMap(static_cast<std::size_t>(f), std::move(labels));
  } catch (const DomainError& e) {
    r.fail(e.what());
  }
  a.content_hash = r.hash();
  return a;
}

std::string artifact_kind(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char m[kMagicSize] = {};
  if (!in.read(m, kMagicSize)) return {};
  for (const char* k : {"CFSYS", "CFCTL", "CFLAY"})
    if (std::memcmp(m, k, 5) == 0 && m[5] == 0) return k;
  return {};
}

void require_derived_from(const Digest& recorded, const Digest& actual, const std::string& what) {
  if (recorded != actual)
    throw PreconditionError(what + " was computed from a different input (recorded " + to_hex(recorded).substr(0, 12) +
                            ", given " + to_hex(actual).substr(0, 12) + ")");
}

}  // namespace coordfree
