#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/rng.hpp"

namespace cml {

namespace fs = std::filesystem;

/// Deterministic file-to-split assignment for a directory dataset laid out
/// as data_dir/<class>/<file>. Per class the three lists partition the
/// class's files.
struct SplitPlan {
    struct ClassFiles {
        std::string class_name;
        std::vector<std::string> train, val, test;
    };
    std::string data_dir;
    std::vector<ClassFiles> classes;
    double train_ratio = 0.0, val_ratio = 0.0, test_ratio = 0.0;
    std::uint64_t seed = 0;
};

/// split name -> class name -> file count
using SplitCounts = std::map<std::string, std::map<std::string, std::size_t>>;

namespace detail {

/// Class subdirectories must be flat and non-empty; returns the
/// lexicographically sorted file names per class, classes sorted by name.
inline std::vector<std::pair<std::string, std::vector<std::string>>>
scan_class_dirs(const fs::path& data_dir) {
    if (!fs::is_directory(data_dir))
        throw io_error("not a directory: " + data_dir.string());
    std::vector<std::pair<std::string, std::vector<std::string>>> classes;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        std::vector<std::string> files;
        for (const auto& file : fs::directory_iterator(entry.path())) {
            if (file.is_directory())
                throw validation_error("nested subdirectory in class '" + name +
                                       "' (flat structure required)");
            files.push_back(file.path().filename().string());
        }
        if (files.empty())
            throw validation_error("empty class directory: " + name);
        std::sort(files.begin(), files.end());
        classes.emplace_back(name, std::move(files));
    }
    if (classes.empty())
        throw validation_error("no class subdirectories in " + data_dir.string());
    std::sort(classes.begin(), classes.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return classes;
}

inline void require_empty_destination(const fs::path& dest) {
    if (fs::exists(dest) && !fs::is_directory(dest))
        throw io_error("destination is not a directory: " + dest.string());
    if (fs::exists(dest) && !fs::is_empty(dest))
        throw io_error("destination not empty: " + dest.string());
}

inline void copy_file_checked(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::copy_file(from, to, fs::copy_options::none, ec);
    if (ec) throw io_error("cannot copy file " + from.string() + ": " + ec.message());
}

} // namespace detail

/// Plan a stratified train/val/test split: per class the sorted file list is
/// shuffled with the seeded generator, then floor(train_ratio*n) files go to
/// train, floor(val_ratio*n) to val, and the remainder to test.
inline SplitPlan plan_split(const std::string& data_dir, double train_ratio, double val_ratio,
                            double test_ratio, std::uint64_t seed) {
    if (train_ratio < 0.0 || val_ratio < 0.0 || test_ratio < 0.0)
        throw validation_error("ratios must be >= 0");
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw validation_error("ratios must sum to 1 (got " + std::to_string(train_ratio) +
                               ", " + std::to_string(val_ratio) + ", " +
                               std::to_string(test_ratio) + ")");

    SplitPlan plan;
    plan.data_dir = data_dir;
    plan.train_ratio = train_ratio;
    plan.val_ratio = val_ratio;
    plan.test_ratio = test_ratio;
    plan.seed = seed;

    Rng rng(seed);
    for (auto& [class_name, files] : detail::scan_class_dirs(data_dir)) {
        rng.shuffle(files);
        const std::size_t n = files.size();
        const std::size_t n_train = std::size_t(std::floor(train_ratio * double(n)));
        const std::size_t n_val =
            std::min(n - n_train, std::size_t(std::floor(val_ratio * double(n))));
        SplitPlan::ClassFiles cf;
        cf.class_name = class_name;
        cf.train.assign(files.begin(), files.begin() + n_train);
        cf.val.assign(files.begin() + n_train, files.begin() + n_train + n_val);
        cf.test.assign(files.begin() + n_train + n_val, files.end());
        plan.classes.push_back(std::move(cf));
    }
    return plan;
}

/// Copy the planned files into destination/{train,val,test}/<class>/.
/// Sources are never touched; the destination must be empty or absent, and
/// split/class directories are created even when their list is empty.
inline SplitCounts execute_split(const SplitPlan& plan, const std::string& destination_dir) {
    const fs::path src(plan.data_dir), dest(destination_dir);
    detail::require_empty_destination(dest);

    SplitCounts counts;
    for (const auto& cf : plan.classes) {
        const std::vector<std::pair<std::string, const std::vector<std::string>*>> parts = {
            {"train", &cf.train}, {"val", &cf.val}, {"test", &cf.test}};
        for (const auto& [split, files] : parts) {
            const fs::path out_dir = dest / split / cf.class_name;
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            if (ec) throw io_error("cannot create " + out_dir.string() + ": " + ec.message());
            for (const std::string& file : *files)
                detail::copy_file_checked(src / cf.class_name / file, out_dir / file);
            counts[split][cf.class_name] = files->size();
        }
    }
    return counts;
}

/// Miniaturize a directory dataset: per class, keep max(1, floor(fraction*n))
/// seeded-shuffle files, copied into destination/<class>/ with the same
/// layout as the source.
inline SplitCounts subsample(const std::string& data_dir, const std::string& destination_dir,
                             double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw validation_error("fraction must be in (0,1]");
    const fs::path src(data_dir), dest(destination_dir);
    detail::require_empty_destination(dest);

    Rng rng(seed);
    SplitCounts counts;
    for (auto& [class_name, files] : detail::scan_class_dirs(data_dir)) {
        rng.shuffle(files);
        const std::size_t n_keep = std::max<std::size_t>(
            1, std::size_t(std::floor(fraction * double(files.size()))));
        const fs::path out_dir = dest / class_name;
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw io_error("cannot create " + out_dir.string() + ": " + ec.message());
        for (std::size_t i = 0; i < n_keep; ++i)
            detail::copy_file_checked(src / class_name / files[i], out_dir / files[i]);
        counts["sampled"][class_name] = n_keep;
    }
    return counts;
}

} // namespace cml
