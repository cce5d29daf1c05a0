#pragma once

#include <string>

namespace lieflow {

/// Renders the per-iteration loss curves of a metrics.jsonl file to a PNG
/// (log-scale y axis). Display-only output.
void plot_metrics(const std::string& metrics_path, const std::string& out_png);

/// Renders per-view PSNR bars of an evaluation report JSON to a PNG.
void plot_eval_report(const std::string& report_path, const std::string& out_png);

/// Dispatches on file content: metrics lines or an evaluation report.
void plot_file(const std::string& input_path, const std::string& out_png);

}  // namespace lieflow
