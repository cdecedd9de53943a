#include "folcoil/field_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace folcoil {
namespace {

constexpr char kMagic[4] = {'F', 'C', 'F', '1'};

template <class T>
void put_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DomainError("truncated field block");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_field_binary(std::ostream& os, const ScalarField& f) {
  const auto& g = f.grid();
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.dim()));
  for (int a = 0; a < g.dim(); ++a) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.resolution(a)));
  for (int a = 0; a < g.dim(); ++a) {
    const auto& name = g.axis_name(a);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (Eigen::Index i = 0; i < f.size(); ++i) put_le<double>(os, f[i]);
}

ScalarField read_field_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DomainError("not a field block");
  const auto dim = get_le<std::uint32_t>(is);
  if (dim == 0 || dim > static_cast<std::uint32_t>(kMaxGridDim)) throw DomainError("bad field dimension");
  std::vector<int> res(dim);
  for (auto& r : res) r = static_cast<int>(get_le<std::uint32_t>(is));
  std::vector<std::string> axes(dim);
  for (auto& name : axes) {
    const auto len = get_le<std::uint32_t>(is);
    if (len > 64) throw DomainError("bad axis name");
    name.resize(len);
    if (!is.read(name.data(), len)) throw DomainError("truncated field block");
  }
  PeriodicGrid g(axes, res);
  ScalarField::Array v(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) v[i] = get_le<double>(is);
  return ScalarField(g, std::move(v));
}

void save_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot open " + path);
  write_field_binary(os, f);
}

ScalarField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DomainError("cannot open " + path);
  return read_field_binary(is);
}

void write_field_csv(std::ostream& os, const ScalarField& f) {
  const auto& g = f.grid();
  for (int a = 0; a < g.dim(); ++a) os << g.axis_name(a) << ',';
  os << "value\n";
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const auto p = g.point(i);
    for (int a = 0; a < g.dim(); ++a) os << p[a] << ',';
    os << f[i] << '\n';
  }
}


// ---------------------------------------------------------------- forms

std::string component_label(const PeriodicGrid& g, bool tangential, const MultiIndex& I) {
  if (I.empty()) return "1";
  std::string s;
  for (int i : I) {
    if (!s.empty()) s += '^';
    s += tangential ? "e" + std::to_string(i + 1) : "d" + g.axis_name(i);
  }
  return s;
}

namespace {

constexpr const char* kFormSchema = "folcoil.form/1";

std::string block_name(const std::filesystem::path& manifest, const std::string& label) {
  std::string safe = label;
  std::replace(safe.begin(), safe.end(), '^', '_');
  return manifest.stem().string() + "." + safe + ".fcf";
}

template <class Tag>
void save_form_impl(const std::string& path, const Form<Tag>& w, bool tangential) {
  const std::filesystem::path manifest(path);
  const auto& g = w.grid();
  nlohmann::ordered_json j;
  j["schema"] = kFormSchema;
  j["type"] = tangential ? "tangential" : "full";
  j["space_dim"] = w.space_dim();
  j["degree"] = w.degree();
  j["grid"]["axes"] = nlohmann::json::array();
  j["grid"]["resolution"] = nlohmann::json::array();
  for (int a = 0; a < g.dim(); ++a) {
    j["grid"]["axes"].push_back(g.axis_name(a));
    j["grid"]["resolution"].push_back(g.resolution(a));
  }
  j["components"] = nlohmann::ordered_json::object();
  for (int i = 0; i < w.size(); ++i) {
    const auto label = component_label(g, tangential, w.indices()[i]);
    const auto file = block_name(manifest, label);
    save_field((manifest.parent_path() / file).string(), w[i]);
    j["components"][label] = file;
  }
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open " + path);
  os << j.dump(2) << '\n';
}

template <class Tag>
Form<Tag> load_form_impl(const std::string& path, bool tangential) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open " + path);
  try {
    const auto j = nlohmann::json::parse(is);
    if (j.at("schema") != kFormSchema) throw DomainError("unsupported form schema in " + path);
    if (j.at("type") != (tangential ? "tangential" : "full")) throw DomainError("wrong form type in " + path);
    const int m = j.at("space_dim"), k = j.at("degree");
    const PeriodicGrid g(j.at("grid").at("axes").get<std::vector<std::string>>(),
                         j.at("grid").at("resolution").get<std::vector<int>>());
    const auto dir = std::filesystem::path(path).parent_path();
    const auto& table = j.at("components");
    std::vector<ScalarField> comps;
    for (const auto& I : basis_indices(m, k)) {
      const auto label = component_label(g, tangential, I);
      if (!table.contains(label)) throw DomainError("form manifest lacks component '" + label + "'");
      comps.push_back(load_field((dir / table.at(label).get<std::string>()).string()));
      if (!(comps.back().grid() == g)) throw DomainError("field block grid differs from manifest: " + label);
    }
    return Form<Tag>(g, m, k, std::move(comps));
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("bad form manifest " + path + ": " + e.what());
  }
}

}  // namespace

void save_form(const std::string& p, const FullForm& w) { save_form_impl(p, w, false); }
void save_form(const std::string& p, const TangentialForm& w) { save_form_impl(p, w, true); }
FullForm load_full_form(const std::string& p) { return load_form_impl<FullTag>(p, false); }
TangentialForm load_tangential_form(const std::string& p) { return load_form_impl<TangentialTag>(p, true); }

}  // namespace folcoil
