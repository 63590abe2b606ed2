#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pointseg/data.hpp"
#include "pointseg/model.hpp"
#include "pointseg/pipeline.hpp"

namespace pointseg::cli {

// Invalid configuration value; `field` is the dotted JSON path, e.g. "train.batch_size".
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)), message_(message) {}
    const std::string& field() const { return field_; }
    const std::string& message() const { return message_; }

private:
    std::string field_;
    std::string message_;
};

struct RunConfig {
    std::uint64_t seed = 7;
    int threads = 1;
    SynthSpec synth;
    int images = 80;
    EncodeConfig encode;
    TrainConfig train;
    TrainMode mode = TrainMode::Scheduler;
    PostConfig post;
    double match_radius = 5.0;
    std::string predict_split = "heldout";  // train, val, test, heldout (val + test) or all

    void validate() const;  // throws ConfigError
};

// Keys starting with '_' are treated as comments; any other unknown key is an error.
RunConfig config_from_json(const std::string& text);
std::string config_to_json(const RunConfig& config);

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

// Returns the process exit code: 0 success, 1 runtime failure, 2 usage or config error.
// Progress goes to `log`; failures are reported there as one JSON object per line.
int run_cli(const std::vector<std::string>& args, std::ostream& log);
int run_cli(int argc, char** argv);

}  // namespace pointseg::cli
