#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "collo/signal.hpp"

namespace collo {

// Signal file: magic "CECG", u32 sample rate, then little-endian float32
// samples until end of file.
void write_signal_file(const std::filesystem::path& path, const EcgRecord& record);
/// Returns samples and sample rate; id, label and annotation are left empty.
EcgRecord read_signal_file(const std::filesystem::path& path);

// Annotation file: text rows "beat_index,genre,onset,offset".
void write_annotation_file(const std::filesystem::path& path, const WaveAnnotation& annotation);
WaveAnnotation read_annotation_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::string id;
    Label label = Label::non_eating;
    std::filesystem::path signal_path;
    std::optional<std::filesystem::path> annotation_path;
};

// Manifest: one row per record, "id,label,signal_path[,annotation_path]".
// Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// Loads every record listed in the manifest. Throws EmptyDataset when the
/// manifest lists no records.
std::vector<EcgRecord> load_dataset(const std::filesystem::path& manifest);

}  // namespace collo
