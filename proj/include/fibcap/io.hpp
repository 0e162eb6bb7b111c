#pragma once

#include <filesystem>
#include <string>

#include "fibcap/pullback.hpp"

namespace fibcap {

// Pullback container: <name>.ivp little-endian binary payload in r-major,
// theta-minor, frame-outer order plus <name>.json sidecar with
// {n_frames, n_r, n_theta, dtype, max_raw, radial_spacing_um,
//  frame_spacing_mm, catheter_offset_um, pullback_id}.
//
// Intensities are divided by max_raw on load so in-memory frames are
// unit-range; save reverses the scaling so a load/save round trip is
// byte-identical for the payload.
Pullback load_pullback(const std::filesystem::path& ivp_path);
void save_pullback(const Pullback& pb, const std::filesystem::path& ivp_path,
                   const std::string& dtype = "u16");

// 8-bit binary PGM (P5), 0 = background, 255 = label.
void save_mask_pgm(const Mask& mask, const std::filesystem::path& path);
Mask load_mask_pgm(const std::filesystem::path& path,
                   MaskClass tag = MaskClass::FC);

// 16-bit PGM used for thickness heatmaps.
void save_pgm16(const Image2D<uint16_t>& img, const std::filesystem::path& path);
Image2D<uint16_t> load_pgm16(const std::filesystem::path& path);

}  // namespace fibcap
