#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/image.hpp"

namespace reid::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("reid_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

inline FrameSequence make_sequence(std::string person, std::string camera, std::vector<Frame> frames) {
    FrameSequence s;
    s.person_id = std::move(person);
    s.camera_id = std::move(camera);
    for (std::size_t i = 0; i < frames.size(); ++i) s.frame_numbers.push_back(static_cast<long>(i));
    s.frames = std::move(frames);
    return s;
}

/// Gray frames whose luma sequence is given; one pixel column wide is enough
/// for most signal tests but the size is configurable.
inline std::vector<Frame> gray_frames(const std::vector<std::uint8_t>& levels, int w = 4, int h = 4) {
    std::vector<Frame> out;
    for (auto v : levels) out.push_back(Frame::filled(w, h, {v, v, v}));
    return out;
}

}  // namespace reid::test
