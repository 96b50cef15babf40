#include "crowdloss/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "crowdloss/error.hpp"

namespace crowdloss::io {

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw InvalidInput("line " + std::to_string(line) + ": " + what);
}

bool skip(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

BBox read_box(std::istringstream& ss, int line) {
  double x1, y1, x2, y2;
  if (!(ss >> x1 >> y1 >> x2 >> y2)) parse_error(line, "expected four box coordinates");
  try {
    return BBox(x1, y1, x2, y2);
  } catch (const InvalidInput& e) {
    parse_error(line, e.what());
  }
}

void expect_end(std::istringstream& ss, int line) {
  std::string extra;
  if (ss >> extra) parse_error(line, "unexpected trailing token '" + extra + "'");
}

void write_box(std::ostream& os, const BBox& b) {
  os << format_real(b.x1()) << ' ' << format_real(b.y1()) << ' ' << format_real(b.x2()) << ' '
     << format_real(b.y2());
}

}  // namespace

void write_scene(std::ostream& os, const Scene& scene) {
  os << "extent " << format_real(scene.width) << ' ' << format_real(scene.height) << '\n';
  for (const auto& p : scene.pedestrians) {
    os << "ped ";
    write_box(os, p.full);
    os << ' ';
    write_box(os, p.visible);
    os << '\n';
  }
  for (const auto& d : scene.distractors) {
    os << "distractor ";
    write_box(os, d);
    os << '\n';
  }
}

Scene read_scene(std::istream& is) {
  Scene scene;
  bool have_extent = false;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (skip(line)) continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "extent") {
      if (!(ss >> scene.width >> scene.height)) parse_error(n, "expected 'extent W H'");
      have_extent = true;
    } else if (kind == "ped") {
      const BBox full = read_box(ss, n);
      const BBox visible = read_box(ss, n);
      scene.pedestrians.push_back({full, visible});
    } else if (kind == "distractor") {
      scene.distractors.push_back(read_box(ss, n));
    } else {
      parse_error(n, "unknown record '" + kind + "'");
    }
    expect_end(ss, n);
  }
  if (!have_extent) throw InvalidInput("scene file: missing 'extent' header");
  scene.validate();
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open scene file '" + path + "'");
  return read_scene(in);
}

void save_scene(const std::string& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write scene file '" + path + "'");
  write_scene(out, scene);
}

void write_probability_map(std::ostream& os, const ProbabilityMap& map) {
  os << map.width() << ' ' << map.height() << ' ' << format_real(map.stride()) << '\n';
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) os << (x ? " " : "") << format_real(map.at(x, y));
    os << '\n';
  }
}

namespace {

struct GridHeader {
  int width = 0;
  int height = 0;
  double stride = 0.0;
};

GridHeader read_header(std::istream& is) {
  GridHeader h;
  if (!(is >> h.width >> h.height >> h.stride)) throw InvalidInput("grid file: expected 'width height stride'");
  if (h.width < 1 || h.height < 1 || !(h.stride > 0.0)) throw InvalidInput("grid file: invalid header");
  return h;
}

}  // namespace

ProbabilityMap read_probability_map(std::istream& is) {
  const GridHeader h = read_header(is);
  std::vector<double> values(static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height));
  for (auto& v : values) {
    if (!(is >> v)) throw InvalidInput("probability map: fewer values than width * height");
  }
  std::string extra;
  if (is >> extra) throw InvalidInput("probability map: more values than width * height");
  return ProbabilityMap(h.width, h.height, h.stride, std::move(values));
}

void write_target_map(std::ostream& os, const TargetMap& map) {
  os << map.width() << ' ' << map.height() << ' ' << format_real(map.stride()) << '\n';
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) os << (x ? " " : "") << static_cast<char>(map.at(x, y));
    os << '\n';
  }
}

TargetMap read_target_map(std::istream& is) {
  const GridHeader h = read_header(is);
  TargetMap map(h.width, h.height, h.stride);
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      char c = 0;
      if (!(is >> c)) throw InvalidInput("target map: fewer labels than width * height");
      if (c != 'P' && c != 'I' && c != 'N') throw InvalidInput(std::string("target map: bad label '") + c + "'");
      map.set(x, y, static_cast<CellLabel>(c));
    }
  }
  char extra = 0;
  if (is >> extra) throw InvalidInput("target map: more labels than width * height");
  return map;
}

void write_detections_csv(std::ostream& os, const std::vector<Detection>& dets) {
  os << "scene_id,x1,y1,x2,y2,score\n";
  for (const auto& d : dets) {
    os << d.scene_id << ',' << format_real(d.box.x1()) << ',' << format_real(d.box.y1()) << ','
       << format_real(d.box.x2()) << ',' << format_real(d.box.y2()) << ',' << format_real(d.score) << '\n';
  }
}

std::vector<Detection> read_detections_csv(std::istream& is) {
  std::vector<Detection> out;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (skip(line)) continue;
    if (n == 1 && line.rfind("scene_id", 0) == 0) continue;
    for (char& c : line) {
      if (c == ',') c = ' ';
    }
    std::istringstream ss(line);
    int scene_id;
    if (!(ss >> scene_id)) parse_error(n, "expected scene_id");
    const BBox box = read_box(ss, n);
    double score;
    if (!(ss >> score)) parse_error(n, "expected score");
    if (!(score >= 0.0 && score <= 1.0)) parse_error(n, "score outside [0, 1]");
    expect_end(ss, n);
    out.push_back({box, score, scene_id});
  }
  return out;
}

void write_curve_csv(std::ostream& os, const EvalCurve& curve) {
  os << "threshold,fppi,miss_rate\n";
  for (const auto& p : curve.points) {
    os << format_real(p.threshold) << ',' << format_real(p.fppi) << ',' << format_real(p.miss_rate) << '\n';
  }
}

}  // namespace crowdloss::io
