#include "semplan/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace semplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string seg_stem(std::size_t frame) { return fmt::format("{:06d}", frame); }

std::ifstream open_in(const fs::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(p, mode);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(p, mode);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  return out;
}

// Splits a CSV body (header skipped) into rows of fields.
std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  auto in = open_in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo, fmt::format("bad number '{}' in {}", s, where.string()));
  }
}

std::uint64_t to_uint(const std::string& s, const fs::path& where) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo, fmt::format("bad integer '{}' in {}", s, where.string()));
  }
}

std::string read_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

}  // namespace

Image16 read_pgm16(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  if (read_token(in) != "P5") throw Error(ErrorCode::kIo, path + ": not a binary PGM");
  const int w = std::stoi(read_token(in));
  const int h = std::stoi(read_token(in));
  const int maxval = std::stoi(read_token(in));
  in.get();  // single whitespace before the raster
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw Error(ErrorCode::kIo, path + ": bad PGM header");
  Image16 img(w, h);
  const bool wide = maxval > 255;
  std::vector<unsigned char> raw(img.data.size() * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (in.gcount() != std::streamsize(raw.size())) throw Error(ErrorCode::kIo, path + ": truncated PGM");
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = wide ? std::uint16_t(raw[2 * i] << 8 | raw[2 * i + 1]) : raw[i];
  return img;
}

void write_pgm16(const Image16& image, const std::string& path) {
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << image.width << ' ' << image.height << "\n65535\n";
  std::vector<unsigned char> raw(image.data.size() * 2);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(image.data[i] >> 8);
    raw[2 * i + 1] = static_cast<unsigned char>(image.data[i] & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
}

ProbabilityMap read_probability_file(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::uint32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw Error(ErrorCode::kIo, path + ": bad header");
  const std::size_t n = std::size_t(dims[0]) * dims[1] * dims[2];
  std::vector<float> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(n * sizeof(float)));
  if (in.gcount() != std::streamsize(n * sizeof(float))) throw Error(ErrorCode::kIo, path + ": truncated");
  return ProbabilityMap(int(dims[0]), int(dims[1]), int(dims[2]), std::vector<double>(raw.begin(), raw.end()));
}

void write_probability_file(const ProbabilityMap& map, const std::string& path) {
  auto out = open_out(path, std::ios::binary);
  const std::uint32_t dims[3] = {std::uint32_t(map.width()), std::uint32_t(map.height()),
                                 std::uint32_t(map.numClasses())};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const std::vector<float> raw(map.values().begin(), map.values().end());
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size() * sizeof(float)));
}

std::string descriptor_to_hex(const Descriptor& d) {
  std::string s;
  s.reserve(64);
  for (int nib = 63; nib >= 0; --nib) {
    int v = 0;
    for (int b = 3; b >= 0; --b) v = v << 1 | int(d[std::size_t(nib * 4 + b)]);
    s.push_back("0123456789abcdef"[v]);
  }
  return s;
}

Descriptor descriptor_from_hex(const std::string& hex) {
  if (hex.size() != 64) throw Error(ErrorCode::kIo, "descriptor must have 64 hex digits");
  Descriptor d;
  for (int i = 0; i < 64; ++i) {
    const char c = char(std::tolower(static_cast<unsigned char>(hex[std::size_t(i)])));
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else throw Error(ErrorCode::kIo, "bad hex digit in descriptor");
    const int nib = 63 - i;
    for (int b = 0; b < 4; ++b)
      if ((v >> b) & 1) d.set(std::size_t(nib * 4 + b));
  }
  return d;
}

ProbabilityMap Dataset::probabilities(const FrameRecord& frame) const {
  if (frame.probabilities) return *frame.probabilities;
  return ProbabilityMap::FromLabels(frame.labels, int(class_names.size()), label_confidence);
}

void write_dataset(const Dataset& ds, const std::string& directory) {
  const fs::path dir(directory);
  fs::create_directories(dir / "seg");

  json meta;
  meta["intrinsics"] = {{"fx", ds.intrinsics.fx}, {"fy", ds.intrinsics.fy},         {"cx", ds.intrinsics.cx},
                        {"cy", ds.intrinsics.cy}, {"width", ds.intrinsics.width}, {"height", ds.intrinsics.height}};
  meta["classes"] = ds.class_names;
  meta["label_confidence"] = ds.label_confidence;
  meta["frames"] = json::array();
  for (const auto& f : ds.frames)
    meta["frames"].push_back({{"index", f.index}, {"timestamp", f.timestamp}, {"probabilities", bool(f.probabilities)}});
  open_out(dir / "dataset.json") << meta.dump(2) << '\n';

  {
    auto out = open_out(dir / "tracks.csv");
    out << "frame,track_id,u,v\n";
    for (const auto& f : ds.frames)
      for (const auto& o : f.observations)
        out << fmt::format("{},{},{:.17g},{:.17g}\n", f.index, o.track, o.pixel.x(), o.pixel.y());
  }
  {
    auto out = open_out(dir / "points.csv");
    out << "track_id,x,y,z,descriptor\n";
    for (const auto& [id, p] : ds.points)
      out << fmt::format("{},{:.17g},{:.17g},{:.17g},{}\n", id, p.initial_position.x(), p.initial_position.y(),
                         p.initial_position.z(), descriptor_to_hex(p.descriptor));
  }
  {
    Trajectory init;
    for (const auto& f : ds.frames) init.push_back({f.timestamp, f.initial_pose.inverse()});
    auto out = open_out(dir / "init_poses.txt");
    write_tum(out, init);
  }
  if (ds.ground_truth) {
    auto out = open_out(dir / "groundtruth.txt");
    write_tum(out, *ds.ground_truth);
  }
  if (ds.truth) {
    json t;
    t["point_object"] = json::array();
    for (const auto& [pid, obj] : ds.truth->point_object) t["point_object"].push_back({pid, obj});
    t["object_planes"] = json::array();
    for (const auto& pl : ds.truth->object_planes) {
      if (pl) {
        const Eigen::Vector4d c = pl->coeffs();
        t["object_planes"].push_back({c(0), c(1), c(2), c(3)});
      } else {
        t["object_planes"].push_back(nullptr);
      }
    }
    open_out(dir / "truth.json") << t.dump(2) << '\n';
  }
  for (const auto& f : ds.frames) {
    const fs::path stem = dir / "seg" / seg_stem(f.index);
    write_pgm16(f.labels, stem.string() + "_label.pgm");
    write_pgm16(f.instances, stem.string() + "_instance.pgm");
    if (f.probabilities) write_probability_file(*f.probabilities, stem.string() + ".prob");
  }
}

Dataset read_dataset(const std::string& directory) {
  const fs::path dir(directory);
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "dataset directory not found: " + directory);
  Dataset ds;
  json meta;
  try {
    meta = json::parse(open_in(dir / "dataset.json"));
    const auto& k = meta.at("intrinsics");
    ds.intrinsics = Intrinsics{k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                               k.at("cy").get<double>(),  k.at("width").get<int>(), k.at("height").get<int>()};
    ds.class_names = meta.at("classes").get<std::vector<std::string>>();
    ds.label_confidence = meta.value("label_confidence", 0.9);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("dataset.json: ") + e.what());
  }
  ds.intrinsics.validate();

  const Trajectory init = read_tum_file((dir / "init_poses.txt").string());
  std::map<std::size_t, std::size_t> slot;
  for (const auto& f : meta.at("frames")) {
    FrameRecord rec;
    rec.index = f.at("index").get<std::size_t>();
    rec.timestamp = f.at("timestamp").get<double>();
    const std::size_t i = ds.frames.size();
    if (i >= init.size()) throw Error(ErrorCode::kIo, "init_poses.txt has fewer poses than frames");
    rec.initial_pose = init[i].world_from_camera.inverse();
    const std::string stem = (dir / "seg" / seg_stem(rec.index)).string();
    rec.labels = read_pgm16(stem + "_label.pgm");
    rec.instances = read_pgm16(stem + "_instance.pgm");
    if (f.value("probabilities", false) || fs::exists(stem + ".prob")) {
      rec.probabilities = read_probability_file(stem + ".prob");
      if (rec.probabilities->numClasses() != int(ds.class_names.size()))
        throw Error(ErrorCode::kIo, stem + ".prob: class count mismatch");
    }
    slot[rec.index] = i;
    ds.frames.push_back(std::move(rec));
  }

  const fs::path tracks = dir / "tracks.csv";
  for (const auto& row : read_csv(tracks)) {
    if (row.size() != 4) throw Error(ErrorCode::kIo, "tracks.csv: expected 4 fields");
    const auto it = slot.find(std::size_t(to_uint(row[0], tracks)));
    if (it == slot.end()) throw Error(ErrorCode::kIo, "tracks.csv references unknown frame " + row[0]);
    ds.frames[it->second].observations.push_back(
        {to_uint(row[1], tracks), Pixeld(to_double(row[2], tracks), to_double(row[3], tracks))});
  }
  const fs::path points = dir / "points.csv";
  for (const auto& row : read_csv(points)) {
    if (row.size() != 5) throw Error(ErrorCode::kIo, "points.csv: expected 5 fields");
    PointRecord p;
    p.track = to_uint(row[0], points);
    p.initial_position = {to_double(row[1], points), to_double(row[2], points), to_double(row[3], points)};
    p.descriptor = descriptor_from_hex(row[4]);
    ds.points[p.track] = p;
  }

  if (fs::exists(dir / "groundtruth.txt")) ds.ground_truth = read_tum_file((dir / "groundtruth.txt").string());
  if (fs::exists(dir / "truth.json")) {
    try {
      const json t = json::parse(open_in(dir / "truth.json"));
      DatasetTruth truth;
      for (const auto& e : t.at("point_object")) truth.point_object[e.at(0).get<PointId>()] = e.at(1).get<int>();
      for (const auto& pl : t.at("object_planes")) {
        if (pl.is_null()) truth.object_planes.emplace_back();
        else
          truth.object_planes.emplace_back(Plane3d(Eigen::Vector4d(pl.at(0).get<double>(), pl.at(1).get<double>(),
                                                                   pl.at(2).get<double>(), pl.at(3).get<double>())));
      }
      ds.truth = std::move(truth);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIo, std::string("truth.json: ") + e.what());
    }
  }
  return ds;
}

}  // namespace semplan
