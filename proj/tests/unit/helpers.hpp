#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

// Fresh scratch directory per call, removed by the caller when convenient.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static int counter = 0;
    auto p = std::filesystem::temp_directory_path() /
             ("sonofield_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}
