#include "srft/model_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace srft {

namespace {

constexpr uint16_t kVersion = 1;

void put_u16(std::vector<unsigned char>& b, uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<unsigned char>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

void put_f32(std::vector<unsigned char>& b, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(b, u);
}

struct Reader {
  const std::vector<unsigned char>& b;
  size_t p = 0;

  void need(size_t n, const std::string& what) {
    if (b.size() - p < n) {
      throw std::runtime_error("model file: truncated while reading " + what +
                               " (offset " + std::to_string(p) + ", need " +
                               std::to_string(n) + " bytes, have " +
                               std::to_string(b.size() - p) + ")");
    }
  }
  uint16_t u16(const std::string& what) {
    need(2, what);
    uint16_t v = uint16_t(b[p]) | uint16_t(b[p + 1]) << 8;
    p += 2;
    return v;
  }
  uint32_t u32(const std::string& what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[p + i]) << (8 * i);
    p += 4;
    return v;
  }
  uint8_t u8(const std::string& what) {
    need(1, what);
    return b[p++];
  }
  std::string str(size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b.data() + p), n);
    p += n;
    return s;
  }
};

}  // namespace

std::vector<unsigned char> encode_model(const Model& m) {
  std::vector<unsigned char> out;
  out.insert(out.end(), {'S', 'R', 'F', 'T'});
  put_u16(out, kVersion);
  const std::string spec = m.spec().serialize();
  put_u32(out, uint32_t(spec.size()));
  out.insert(out.end(), spec.begin(), spec.end());
  put_u32(out, uint32_t(m.param_names().size()));
  for (const std::string& name : m.param_names()) {
    const Tensor& t = m.param(name);
    put_u16(out, uint16_t(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(4);
    const Shape s = t.shape();
    put_u32(out, uint32_t(s.n));
    put_u32(out, uint32_t(s.c));
    put_u32(out, uint32_t(s.h));
    put_u32(out, uint32_t(s.w));
    for (size_t i = 0; i < t.size(); ++i) put_f32(out, t.data()[i]);
  }
  return out;
}

Model decode_model(const std::vector<unsigned char>& bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), "SRFT", 4) != 0) {
    throw std::runtime_error("model file: bad magic, expected \"SRFT\"");
  }
  r.p = 4;
  const uint16_t ver = r.u16("version");
  if (ver != kVersion) {
    throw std::runtime_error("model file: unsupported version " + std::to_string(ver) +
                             " (expected " + std::to_string(kVersion) + ")");
  }
  const uint32_t spec_len = r.u32("spec text length");
  const std::string spec_text = r.str(spec_len, "spec text");
  Model m;
  m.set_spec(ModelSpec::parse(spec_text));
  const uint32_t nparams = r.u32("parameter count");
  for (uint32_t i = 0; i < nparams; ++i) {
    const std::string ctx = "parameter " + std::to_string(i);
    const uint16_t name_len = r.u16(ctx + " name length");
    const std::string name = r.str(name_len, ctx + " name");
    const uint8_t rank = r.u8("rank of '" + name + "'");
    if (rank != 4) {
      throw std::runtime_error("model file: parameter '" + name + "' has rank " +
                               std::to_string(rank) + ", expected 4");
    }
    Shape s;
    s.n = int(r.u32("dim 0 of '" + name + "'"));
    s.c = int(r.u32("dim 1 of '" + name + "'"));
    s.h = int(r.u32("dim 2 of '" + name + "'"));
    s.w = int(r.u32("dim 3 of '" + name + "'"));
    if (s.numel() <= 0 || s.numel() > (int64_t(1) << 28)) {
      throw std::runtime_error("model file: parameter '" + name + "' has bad shape " +
                               s.str());
    }
    Tensor t(s);
    const std::string what = "data of '" + name + "'";
    r.need(size_t(s.numel()) * 4, what);
    for (int64_t j = 0; j < s.numel(); ++j) {
      uint32_t u = 0;
      for (int k = 0; k < 4; ++k) u |= uint32_t(r.b[r.p + k]) << (8 * k);
      r.p += 4;
      float f;
      std::memcpy(&f, &u, 4);
      t.data()[j] = f;
    }
    m.add_param(name, std::move(t));
  }
  if (r.p != bytes.size()) {
    throw std::runtime_error("model file: " + std::to_string(bytes.size() - r.p) +
                             " trailing bytes after last parameter");
  }
  return m;
}

void save_model(const Model& m, const std::string& path) {
  const auto bytes = encode_model(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open model file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_model(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(e.what()) + " in '" + path + "'");
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_float(float v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  return buf;
}

}  // namespace

std::string serialize_kernel(const KernelSpec& k) {
  std::ostringstream os;
  switch (k.kind) {
    case KernelKind::gaussian:
      os << "gaussian " << fmt_double(k.sigma_x) << " " << fmt_double(k.sigma_y)
         << " " << fmt_double(k.theta) << " " << k.support;
      break;
    case KernelKind::disk:
      os << "disk " << fmt_double(k.radius) << " " << k.support;
      break;
    case KernelKind::explicit_values: {
      os << "explicit " << k.support;
      for (int i = 0; i < k.support * k.support; ++i) {
        os << ((i % k.support == 0) ? "\n" : " ") << fmt_float(k.values[i]);
      }
      break;
    }
  }
  os << "\n";
  return os.str();
}

KernelSpec parse_kernel(const std::string& text) {
  std::istringstream is(text);
  std::string kind;
  if (!(is >> kind)) throw std::runtime_error("kernel spec: empty input");
  if (kind == "gaussian") {
    double sx, sy, th;
    int support;
    if (!(is >> sx >> sy >> th >> support)) {
      throw std::runtime_error("kernel spec: gaussian needs sigma_x sigma_y theta support");
    }
    return KernelSpec::gaussian(sx, sy, th, support);
  }
  if (kind == "disk") {
    double r;
    int support;
    if (!(is >> r >> support)) {
      throw std::runtime_error("kernel spec: disk needs radius support");
    }
    return KernelSpec::disk(r, support);
  }
  if (kind == "explicit") {
    int support;
    if (!(is >> support)) throw std::runtime_error("kernel spec: explicit needs support");
    if (support < 1 || support % 2 == 0 || support > 99) {
      throw std::runtime_error("kernel spec: bad support " + std::to_string(support));
    }
    std::vector<float> vals(size_t(support) * support);
    for (size_t i = 0; i < vals.size(); ++i) {
      if (!(is >> vals[i])) {
        throw std::runtime_error("kernel spec: expected " + std::to_string(vals.size()) +
                                 " explicit values, got " + std::to_string(i));
      }
    }
    return KernelSpec::explicit_kernel(support, std::move(vals));
  }
  throw std::runtime_error("kernel spec: unknown kind '" + kind +
                           "' (expected gaussian, disk or explicit)");
}

KernelSpec load_kernel(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open kernel file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_kernel(ss.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(e.what()) + " in '" + path + "'");
  }
}

void save_kernel(const KernelSpec& k, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << serialize_kernel(k);
  if (!f) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace srft
