#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deeppe/error.hpp"
#include "deeppe/geom3d.hpp"

namespace dpe {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void fail(ErrorCode code, const std::filesystem::path& path,
                       std::size_t line_no, const std::string& what) {
  throw Error(code, path.string() + ":" + std::to_string(line_no) + ": " + what);
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  }

  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") {
    fail(ErrorCode::kPlyHeader, path, line_no, "missing 'ply' magic line");
  }

  std::size_t vertex_count = 0;
  bool have_vertex = false;
  bool in_vertex = false;
  bool have_format = false;
  std::vector<std::string> props;
  for (;;) {
    if (!next_line()) {
      fail(ErrorCode::kPlyHeader, path, line_no, "header ended before end_header");
    }
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() != 3) {
        fail(ErrorCode::kPlyHeader, path, line_no, "malformed format line");
      }
      if (tok[1] != "ascii") {
        fail(ErrorCode::kPlyFormat, path, line_no,
             "unsupported PLY format '" + tok[1] + "' (only ascii)");
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) {
        fail(ErrorCode::kPlyHeader, path, line_no, "malformed element line");
      }
      double count = 0;
      if (!parse_double(tok[2], count) || count < 0) {
        fail(ErrorCode::kPlyHeader, path, line_no, "bad element count '" + tok[2] + "'");
      }
      if (tok[1] == "vertex") {
        have_vertex = true;
        in_vertex = true;
        vertex_count = static_cast<std::size_t>(count);
      } else {
        in_vertex = false;
        if (count != 0) {
          fail(ErrorCode::kPlyHeader, path, line_no,
               "unsupported non-empty element '" + tok[1] + "'");
        }
      }
    } else if (tok[0] == "property") {
      if (tok.size() != 3) {
        fail(ErrorCode::kPlyHeader, path, line_no, "malformed property line");
      }
      if (!in_vertex) continue;
      props.push_back(tok[2]);
    } else {
      fail(ErrorCode::kPlyHeader, path, line_no, "unknown header keyword '" + tok[0] + "'");
    }
  }
  if (!have_format) {
    fail(ErrorCode::kPlyHeader, path, line_no, "missing format line");
  }
  if (!have_vertex) {
    fail(ErrorCode::kPlyHeader, path, line_no, "missing vertex element");
  }

  auto find = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  if (ix < 0 || iy < 0 || iz < 0) {
    fail(ErrorCode::kPlyHeader, path, line_no, "vertex element lacks x/y/z properties");
  }
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  const bool normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  if (normals) cloud.normals.reserve(vertex_count);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!next_line()) {
      fail(ErrorCode::kPlyBody, path, line_no + 1,
           "truncated body: expected " + std::to_string(vertex_count) +
               " vertices, got " + std::to_string(v));
    }
    const auto tok = split_ws(line);
    if (tok.size() < props.size()) {
      fail(ErrorCode::kPlyBody, path, line_no,
           "expected " + std::to_string(props.size()) + " values, got " +
               std::to_string(tok.size()));
    }
    std::vector<double> vals(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (!parse_double(tok[i], vals[i])) {
        fail(ErrorCode::kPlyBody, path, line_no, "bad number '" + tok[i] + "'");
      }
    }
    cloud.points.emplace_back(vals[ix], vals[iy], vals[iz]);
    if (normals) cloud.normals.emplace_back(vals[inx], vals[iny], vals[inz]);
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  std::ofstream out(tmp);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  }
  const bool normals = cloud.has_normals();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (normals) {
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  }
  out << "end_header\n";
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", p.x(), p.y(), p.z());
    out << buf;
    if (normals) {
      const auto& n = cloud.normals[i];
      std::snprintf(buf, sizeof(buf), " %.17g %.17g %.17g", n.x(), n.y(), n.z());
      out << buf;
    }
    out << '\n';
  }
  out.close();
  if (!out) {
    throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "cannot rename into '" + path.string() + "': " + ec.message());
  }
}

}  // namespace dpe
