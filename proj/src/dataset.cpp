#include "collo/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "collo/error.hpp"
#include "collo/io.hpp"

namespace collo {

namespace fs = std::filesystem;

void write_signal_file(const fs::path& path, const EcgRecord& record) {
    ByteWriter out;
    out.magic("CECG");
    out.u32(static_cast<std::uint32_t>(record.sample_rate));
    for (double v : record.samples) out.f32(static_cast<float>(v));
    out.save(path);
}

EcgRecord read_signal_file(const fs::path& path) {
    ByteReader in(read_file_bytes(path), path.string());
    if (!in.magic("CECG")) fail(ErrorCode::IoError, path.string() + ": not a CECG signal file");
    EcgRecord record;
    record.sample_rate = in.u32();
    if (in.remaining() % 4 != 0) fail(ErrorCode::IoError, path.string() + ": truncated sample stream");
    record.samples.reserve(in.remaining() / 4);
    while (in.remaining() > 0) record.samples.push_back(in.f32());
    return record;
}

void write_annotation_file(const fs::path& path, const WaveAnnotation& annotation) {
    std::ostringstream out;
    for (std::size_t b = 0; b < annotation.beats.size(); ++b)
        for (Genre g : genres_in_time_order()) {
            const auto it = annotation.beats[b].find(g);
            if (it == annotation.beats[b].end()) continue;
            out << b << ',' << to_string(g) << ',' << it->second.onset << ',' << it->second.offset << '\n';
        }
    write_text_file(path, out.str());
}

WaveAnnotation read_annotation_file(const fs::path& path) {
    WaveAnnotation annotation;
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4)
            fail(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
        try {
            const std::size_t beat = std::stoul(fields[0]);
            if (beat >= annotation.beats.size()) annotation.beats.resize(beat + 1);
            annotation.beats[beat][parse_genre(fields[1])] = WaveInterval{std::stoll(fields[2]), std::stoll(fields[3])};
        } catch (const std::logic_error&) {
            fail(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": malformed row");
        }
    }
    validate_annotation(annotation);
    return annotation;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    const fs::path base = path.parent_path();
    std::vector<ManifestEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < 3 || fields.size() > 4)
            fail(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": expected 3 or 4 fields");
        if (line_no == 1 && fields[0] == "id") continue;  // optional header
        ManifestEntry entry;
        entry.id = fields[0];
        entry.label = parse_label(fields[1]);
        entry.signal_path = base / fields[2];
        if (fields.size() == 4 && !fields[3].empty()) entry.annotation_path = base / fields[3];
        entries.push_back(std::move(entry));
    }
    return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    std::ostringstream out;
    for (const auto& e : entries) {
        out << e.id << ',' << to_string(e.label) << ',' << e.signal_path.generic_string();
        if (e.annotation_path) out << ',' << e.annotation_path->generic_string();
        out << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<EcgRecord> load_dataset(const fs::path& manifest) {
    const auto entries = read_manifest(manifest);
    if (entries.empty()) fail(ErrorCode::EmptyDataset, manifest.string() + " lists no records");
    std::vector<EcgRecord> records;
    records.reserve(entries.size());
    for (const auto& e : entries) {
        EcgRecord record = read_signal_file(e.signal_path);
        record.id = e.id;
        record.label = e.label;
        if (e.annotation_path) {
            record.annotation = read_annotation_file(*e.annotation_path);
            record.annotation->record_id = e.id;
        }
        record.validate();
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace collo
