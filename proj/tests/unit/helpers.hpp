#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "sciline/common.hpp"
#include "sciline/corpus.hpp"

namespace testing {

// Fresh directory under the build tree, removed up front so reruns start clean.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::current_path() / "scratch" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline sciline::PaperRecord paper(std::string id, int year, std::vector<std::string> refs = {},
                                  std::vector<std::string> fields = {"F"}) {
    sciline::PaperRecord p;
    p.paper_id = std::move(id);
    p.year = year;
    p.reference_ids = std::move(refs);
    p.fields_l1 = std::move(fields);
    return p;
}

}  // namespace testing
