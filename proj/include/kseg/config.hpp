#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kseg/losses.hpp"
#include "kseg/model.hpp"
#include "kseg/phantom.hpp"
#include "kseg/training.hpp"
#include "kseg/volume.hpp"

namespace kseg {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything a run needs, loadable from one JSON file. Command-line flags
/// override individual values.
struct ExperimentConfig {
    // Dataset source: either a phantom spec or a preprocessed-case directory.
    std::optional<PhantomSpec> phantom;
    int64_t phantom_cases = 60;
    std::optional<std::string> case_dir;

    PreprocessConfig preprocess;
    ArchitectureConfig arch = ArchitectureConfig::desk_scale();

    std::array<int64_t, 3> crop_shape{32, 48, 48};
    int64_t n_pairs = 240;
    double same_fraction = 0.5;

    TrainConfig proxy_train;  // epochs default 40
    TrainConfig seg_train;    // epochs default 60
    LossSchedule schedule;

    double split_fraction = 0.8;
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "runs/experiment";

    int smoothing_window = 5;
    double dc_threshold = 0.8;

    ExperimentConfig();
    void validate() const;
    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
    void save(const std::string& path) const;
};

}  // namespace kseg
