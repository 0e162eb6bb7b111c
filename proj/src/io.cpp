#include "fibcap/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace fibcap {
namespace {

using nlohmann::json;

std::vector<char> read_all(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  f.seekg(0, std::ios::end);
  std::vector<char> buf(static_cast<size_t>(f.tellg()));
  f.seekg(0);
  f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  return buf;
}

std::filesystem::path sidecar_path(const std::filesystem::path& ivp) {
  auto p = ivp;
  p.replace_extension(".json");
  return p;
}

}  // namespace

Pullback load_pullback(const std::filesystem::path& ivp_path) {
  json meta;
  {
    std::ifstream f(sidecar_path(ivp_path));
    if (!f)
      throw std::runtime_error("missing sidecar " + sidecar_path(ivp_path).string());
    try {
      f >> meta;
    } catch (const json::parse_error& e) {
      throw std::runtime_error("corrupt sidecar: " + std::string(e.what()));
    }
  }

  const int n_frames = meta.at("n_frames").get<int>();
  const int n_r = meta.at("n_r").get<int>();
  const int n_theta = meta.at("n_theta").get<int>();
  const std::string dtype = meta.at("dtype").get<std::string>();
  const double max_raw = meta.at("max_raw").get<double>();
  if (n_frames < 1 || n_r < 1 || n_theta < 1 || max_raw <= 0)
    throw std::runtime_error("corrupt sidecar: bad dimensions");
  if (dtype != "u16" && dtype != "f32")
    throw std::runtime_error("corrupt sidecar: unknown dtype " + dtype);

  Pullback pb;
  pb.pullback_id = meta.value("pullback_id", ivp_path.stem().string());
  pb.geometry.radial_spacing_um = meta.value("radial_spacing_um", 5.0);
  pb.geometry.frame_spacing_mm = meta.value("frame_spacing_mm", 0.2);
  pb.geometry.catheter_offset_um = meta.value("catheter_offset_um", 400.0);
  pb.geometry.theta_count = n_theta;

  const auto payload = read_all(ivp_path);
  const size_t elem = dtype == "u16" ? 2 : 4;
  const size_t want = static_cast<size_t>(n_frames) * n_r * n_theta * elem;
  if (payload.size() != want)
    throw std::runtime_error("payload size mismatch: expected " +
                             std::to_string(want) + " bytes, got " +
                             std::to_string(payload.size()));

  pb.frames.reserve(n_frames);
  const char* src = payload.data();
  for (int fi = 0; fi < n_frames; ++fi) {
    PolarFrame frame;
    frame.frame_index = fi;
    frame.data = ImageF(n_r, n_theta);
    for (size_t i = 0; i < frame.data.size(); ++i, src += elem) {
      double v;
      if (dtype == "u16") {
        uint16_t raw;
        std::memcpy(&raw, src, 2);
        v = raw;
      } else {
        float raw;
        std::memcpy(&raw, src, 4);
        v = raw;
      }
      if (!std::isfinite(v) || v < 0)
        throw std::runtime_error("non-finite or negative intensity in payload");
      frame.data.raw()[i] = static_cast<float>(v / max_raw);
    }
    pb.frames.push_back(std::move(frame));
  }
  pb.validate();
  return pb;
}

void save_pullback(const Pullback& pb, const std::filesystem::path& ivp_path,
                   const std::string& dtype) {
  pb.validate();
  if (dtype != "u16" && dtype != "f32")
    throw std::runtime_error("save_pullback: unknown dtype " + dtype);
  const double max_raw = dtype == "u16" ? 65535.0 : 1.0;

  std::ofstream f(ivp_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + ivp_path.string());
  for (const auto& frame : pb.frames) {
    for (float v : frame.data.raw()) {
      if (dtype == "u16") {
        const uint16_t raw =
            static_cast<uint16_t>(std::lround(std::min(1.0, (double)v) * max_raw));
        f.write(reinterpret_cast<const char*>(&raw), 2);
      } else {
        f.write(reinterpret_cast<const char*>(&v), 4);
      }
    }
  }

  json meta{{"n_frames", pb.n_frames()},
            {"n_r", pb.n_r()},
            {"n_theta", pb.n_theta()},
            {"dtype", dtype},
            {"max_raw", max_raw},
            {"radial_spacing_um", pb.geometry.radial_spacing_um},
            {"frame_spacing_mm", pb.geometry.frame_spacing_mm},
            {"catheter_offset_um", pb.geometry.catheter_offset_um},
            {"pullback_id", pb.pullback_id}};
  std::ofstream sf(sidecar_path(ivp_path));
  sf << meta.dump(2) << "\n";
}

void save_mask_pgm(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "P5\n" << mask.cols() << " " << mask.rows() << "\n255\n";
  for (uint8_t v : mask.data.raw()) {
    const uint8_t b = v ? 255 : 0;
    f.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Mask load_mask_pgm(const std::filesystem::path& path, MaskClass tag) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int w, h, maxval;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("bad PGM header in " + path.string());
  f.get();  // single whitespace after header
  Mask m(h, w, tag);
  std::vector<char> buf(static_cast<size_t>(w) * h);
  f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated PGM " + path.string());
  for (size_t i = 0; i < buf.size(); ++i)
    m.data.raw()[i] = static_cast<uint8_t>(buf[i]) >= 128 ? 1 : 0;
  return m;
}

void save_pgm16(const Image2D<uint16_t>& img, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "P5\n" << img.cols() << " " << img.rows() << "\n65535\n";
  for (uint16_t v : img.raw()) {
    const uint8_t hi = static_cast<uint8_t>(v >> 8), lo = static_cast<uint8_t>(v & 0xff);
    f.write(reinterpret_cast<const char*>(&hi), 1);  // PGM is big-endian
    f.write(reinterpret_cast<const char*>(&lo), 1);
  }
}

Image2D<uint16_t> load_pgm16(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  int w, h, maxval;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 65535)
    throw std::runtime_error("bad 16-bit PGM header in " + path.string());
  f.get();
  Image2D<uint16_t> img(h, w);
  for (auto& v : img.raw()) {
    uint8_t hi, lo;
    f.read(reinterpret_cast<char*>(&hi), 1);
    f.read(reinterpret_cast<char*>(&lo), 1);
    v = static_cast<uint16_t>((hi << 8) | lo);
  }
  if (!f) throw std::runtime_error("truncated PGM " + path.string());
  return img;
}

}  // namespace fibcap
