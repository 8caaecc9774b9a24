#pragma once

#include "config.hpp"

#include <string>
#include <vector>

namespace htsf {

void cmd_synth(const std::string &spec_path, const std::string &output, std::optional<std::uint64_t> seed);
void cmd_forecast(const Options &opts);
void cmd_reconcile(const Options &opts);
void cmd_nnd(const Options &opts);
void cmd_evaluate(const Options &opts);
void cmd_plot(const Options &opts, const std::vector<std::string> &nodes);

struct ItalianOptions {
    std::string output;
    std::string input; // local copy of the wide CSV; downloaded when empty
    std::string url;
};
void cmd_fetch_italian(const ItalianOptions &opts);

} // namespace htsf
