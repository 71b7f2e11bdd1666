#include "pathflow/bundle_io.hpp"

#include "pathflow/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pathflow {

namespace {

using nlohmann::json;

void append_array(std::string& out, const Eigen::VectorXd& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_double(v(i));
  }
  out += ']';
}

Eigen::VectorXd to_vector(const json& arr, const char* what) {
  if (!arr.is_array()) throw ValidationError(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ValidationError(std::string(what) + " must contain numbers");
    v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
  }
  return v;
}

int coords_per_point(const GroupTag& tag) {
  switch (tag.kind) {
    case GroupKind::Torus: return tag.dim;
    case GroupKind::SO3: return 9;
    case GroupKind::Heisenberg: return 2 * tag.dim + 1;
  }
  return 0;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string bundle_to_json(const EmpiricalMeasure& measure) {
  const GroupTag& tag = measure.tag();
  std::string out = "{\"format\": " + std::to_string(kBundleFormat) + ", \"group\": {\"tag\": \"" + tag.name() +
                    "\", \"dim\": " + std::to_string(tag.dim) + "}, \"grid\": " +
                    std::to_string(measure.grid_size()) + ",\n \"weights\": ";
  append_array(out, measure.weights());
  out += ",\n \"paths\": [";
  for (std::size_t i = 0; i < measure.size(); ++i) {
    out += i == 0 ? "\n  [" : ",\n  [";
    const auto& pts = measure.support()[i].points();
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k > 0) out += ", ";
      append_array(out, pts[k].coords());
    }
    out += ']';
  }
  out += "\n ]}\n";
  return out;
}

EmpiricalMeasure bundle_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed bundle JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<int>() != kBundleFormat) throw ValidationError("unsupported bundle format");
    const GroupTag tag = GroupTag::parse(doc.at("group").at("tag").get<std::string>(),
                                         doc.at("group").at("dim").get<int>());
    const int grid = doc.at("grid").get<int>();
    if (grid < 1) throw ValidationError("bundle grid must be positive");
    const Eigen::VectorXd weights = to_vector(doc.at("weights"), "weights");
    const json& paths = doc.at("paths");
    if (!paths.is_array() || paths.size() != static_cast<std::size_t>(weights.size())) {
      throw ValidationError("bundle paths do not match weights");
    }
    const int width = coords_per_point(tag);
    std::vector<DiscretePath> support;
    support.reserve(paths.size());
    for (const json& path : paths) {
      if (!path.is_array() || path.size() != static_cast<std::size_t>(grid) + 1) {
        throw ValidationError("bundle path has the wrong number of points");
      }
      std::vector<GroupElement> pts;
      pts.reserve(path.size());
      for (const json& point : path) {
        const Eigen::VectorXd c = to_vector(point, "point");
        if (c.size() != width) throw ValidationError("bundle point has the wrong number of coordinates");
        pts.push_back(GroupElement::from_coords(tag, c));
      }
      support.emplace_back(std::move(pts));
    }
    return {std::move(support), weights};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bundle JSON does not match the schema: ") + e.what());
  }
}

void write_bundle(const std::filesystem::path& file, const EmpiricalMeasure& measure) {
  write_text(file, bundle_to_json(measure));
}

EmpiricalMeasure read_bundle(const std::filesystem::path& file) { return bundle_from_json(read_text(file)); }

std::string coupling_csv(const Coupling& coupling) {
  std::string out = "i,j,mass\n";
  for (Eigen::Index i = 0; i < coupling.plan.rows(); ++i)
    for (Eigen::Index j = 0; j < coupling.plan.cols(); ++j) {
      if (coupling.plan(i, j) <= 0.0) continue;
      out += std::to_string(i) + ',' + std::to_string(j) + ',' + format_double(coupling.plan(i, j)) + '\n';
    }
  return out;
}

std::string potentials_json(const DualPotentials& potentials) {
  std::string out = "{\"p\": " + format_double(potentials.p) + ", \"phi\": ";
  append_array(out, potentials.phi);
  out += ", \"psi\": ";
  append_array(out, potentials.psi);
  out += "}\n";
  return out;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidationError("cannot write " + file.string());
  os << text;
  if (!os.flush()) throw ValidationError("cannot write " + file.string());
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ValidationError("cannot read " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace pathflow
