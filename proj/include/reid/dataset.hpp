#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "reid/error.hpp"
#include "reid/image.hpp"
#include "reid/image_io.hpp"

namespace reid {

/// Frames of one person seen by one camera.
struct FrameSequence {
    std::string person_id;
    std::string camera_id;
    std::vector<Frame> frames;
    /// Numeric frame label per frame (the file's index on disk).
    std::vector<long> frame_numbers;

    std::size_t size() const noexcept { return frames.size(); }
};

/// Throws MalformedSequence unless the sequence has >= 2 frames of one size.
inline void validate_sequence(const FrameSequence& seq) {
    const std::string who = "person " + seq.person_id + ", camera " + seq.camera_id;
    if (seq.frames.size() < 2) {
        throw MalformedSequence(who + ": needs at least 2 frames, has " +
                                std::to_string(seq.frames.size()));
    }
    if (!seq.frame_numbers.empty() && seq.frame_numbers.size() != seq.frames.size()) {
        throw MalformedSequence(who + ": frame label count does not match frame count");
    }
    const int w = seq.frames.front().width();
    const int h = seq.frames.front().height();
    for (const Frame& f : seq.frames) {
        if (f.width() != w || f.height() != h) {
            throw MalformedSequence(who + ": frames differ in size");
        }
    }
}

/// Orders strings with embedded numbers by value ("cam2" < "cam10").
inline bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
        if (da && db) {
            std::size_t ie = i;
            std::size_t je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            std::string na = a.substr(i, ie - i);
            std::string nb = b.substr(j, je - j);
            na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
            nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
            if (na.size() != nb.size()) return na.size() < nb.size();
            if (na != nb) return na < nb;
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
    return a < b;
}

struct NaturalLess {
    bool operator()(const std::string& a, const std::string& b) const { return natural_less(a, b); }
};

class Dataset {
public:
    Dataset() = default;

    explicit Dataset(std::vector<FrameSequence> sequences) : sequences_(std::move(sequences)) {
        for (const auto& s : sequences_) validate_sequence(s);
        std::stable_sort(sequences_.begin(), sequences_.end(), [](const auto& a, const auto& b) {
            if (a.camera_id != b.camera_id) return natural_less(a.camera_id, b.camera_id);
            return natural_less(a.person_id, b.person_id);
        });
        for (const auto& s : sequences_) {
            identities_.insert(s.person_id);
            cameras_.insert(s.camera_id);
        }
    }

    const std::vector<FrameSequence>& sequences() const noexcept { return sequences_; }
    const std::set<std::string, NaturalLess>& identities() const noexcept { return identities_; }
    const std::set<std::string, NaturalLess>& cameras() const noexcept { return cameras_; }

    /// Identities with at least one sequence in both `cam_a` and `cam_b`.
    std::vector<std::string> identities_in_both(const std::string& cam_a, const std::string& cam_b) const {
        std::set<std::string, NaturalLess> in_a;
        std::set<std::string, NaturalLess> in_b;
        for (const auto& s : sequences_) {
            if (s.camera_id == cam_a) in_a.insert(s.person_id);
            if (s.camera_id == cam_b) in_b.insert(s.person_id);
        }
        std::vector<std::string> out;
        for (const auto& id : in_a) {
            if (in_b.count(id)) out.push_back(id);
        }
        return out;
    }

    const FrameSequence* find(const std::string& camera, const std::string& person) const {
        for (const auto& s : sequences_) {
            if (s.camera_id == camera && s.person_id == person) return &s;
        }
        return nullptr;
    }

private:
    std::vector<FrameSequence> sequences_;
    std::set<std::string, NaturalLess> identities_;
    std::set<std::string, NaturalLess> cameras_;
};

namespace detail {

inline bool is_image_extension(std::string ext) {
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline bool parse_frame_number(const std::string& stem, long& out) {
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
        return false;
    }
    out = std::stol(stem);
    return true;
}

/// Loads the numerically named frames of one sequence directory.
inline FrameSequence load_sequence_dir(const std::filesystem::path& dir, std::string camera, std::string person) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw NotFound("sequence directory " + dir.string() + " does not exist");

    std::vector<std::pair<long, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const fs::path& p = entry.path();
        long number = 0;
        if (!is_image_extension(p.extension().string()) || !parse_frame_number(p.stem().string(), number)) continue;
        files.emplace_back(number, p);
    }
    std::sort(files.begin(), files.end());

    FrameSequence seq;
    seq.person_id = std::move(person);
    seq.camera_id = std::move(camera);
    for (const auto& [number, path] : files) {
        seq.frames.push_back(read_image(path));
        seq.frame_numbers.push_back(number);
    }
    validate_sequence(seq);
    return seq;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Loads a dataset from a manifest file with one `camera,person,path` line
/// per sequence; relative paths resolve against the manifest's directory.
/// Blank lines and lines starting with '#' are skipped.
inline Dataset load_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw NotFound("manifest " + manifest.string() + " does not exist");
    std::vector<FrameSequence> seqs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(detail::trim(field));
        if (fields.size() != 3) {
            throw FormatError(manifest.string() + ":" + std::to_string(line_no) +
                              ": expected camera,person,path");
        }
        std::filesystem::path dir = fields[2];
        if (dir.is_relative()) dir = manifest.parent_path() / dir;
        seqs.push_back(detail::load_sequence_dir(dir, fields[0], fields[1]));
    }
    if (seqs.empty()) throw NotFound("manifest " + manifest.string() + " lists no sequences");
    return Dataset(std::move(seqs));
}

/// Loads `<root>/<camera>/<person>/<frame>.{png,jpg,jpeg}`. Frame files are
/// ordered by the numeric value of their stem. If `<root>/manifest.csv`
/// exists it takes precedence over the directory layout.
inline Dataset load_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw NotFound("dataset root " + root.string() + " does not exist");
    if (fs::is_regular_file(root / "manifest.csv")) return load_manifest(root / "manifest.csv");

    std::vector<std::pair<std::string, std::string>> dirs;
    for (const auto& cam : fs::directory_iterator(root)) {
        if (!cam.is_directory()) continue;
        for (const auto& person : fs::directory_iterator(cam.path())) {
            if (!person.is_directory()) continue;
            dirs.emplace_back(cam.path().filename().string(), person.path().filename().string());
        }
    }
    if (dirs.empty()) throw NotFound("dataset root " + root.string() + " contains no <camera>/<person> directories");
    std::sort(dirs.begin(), dirs.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return natural_less(a.first, b.first);
        return natural_less(a.second, b.second);
    });

    std::vector<FrameSequence> seqs;
    seqs.reserve(dirs.size());
    for (const auto& [cam, person] : dirs) {
        seqs.push_back(detail::load_sequence_dir(root / cam / person, cam, person));
    }
    return Dataset(std::move(seqs));
}

}  // namespace reid
