#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irid/core/types.hpp"

namespace irid {

struct LightRecord {
    int light_id = 0;
    int slot = 0;              // 0..5 = procedural HDR env, 6 = two point lights
    uint64_t seed = 0;
    std::string kind;          // "hdr_env" | "two_point"
    std::vector<Vec3> positions;    // two_point only
    std::vector<Vec3> intensities;  // two_point only
};

struct ManifestEntry {
    int view_id = 0;
    int light_id = 0;
    std::string rgb_path;     // 8-bit PNG previews
    std::string albedo_path;
    std::string normal_path;
    std::string mr_path;
    std::string mask_path;
    std::string rgb_pfm;      // lossless float copies
    std::string albedo_pfm;
    std::string normal_pfm;
    std::string mr_pfm;
};

struct ManifestObject {
    std::string object_id;
    uint64_t scene_seed = 0;
    std::vector<Camera> views;        // index = view_id
    std::vector<LightRecord> lights;  // index = light_id
    std::vector<ManifestEntry> entries;
};

struct DatasetManifest {
    int resolution = 0;
    std::vector<ManifestObject> objects;
    bool partial = false;      // set when generation aborted mid-write
    std::string error;
    std::string root;          // directory of manifest.json; not serialized

    const ManifestEntry& entry(int object, int view_id, int light_id) const;
    std::string resolve(const std::string& rel_path) const;
};

void save_manifest(const DatasetManifest& m, const std::string& path);

// Parses manifest.json; when validate is set, checks that every referenced
// image exists at the declared resolution and that each object's
// (view_id, light_id) grid is complete.
DatasetManifest load_manifest(const std::string& path, bool validate = true);

// Loads the intrinsic maps of one (object, view) from the PFM copies.
IntrinsicSet load_intrinsics(const DatasetManifest& m, int object, int view_id);

// Loads the tone-mapped RGB conditioning image of one entry.
Image load_rgb(const DatasetManifest& m, int object, int view_id, int light_id);

} // namespace irid
