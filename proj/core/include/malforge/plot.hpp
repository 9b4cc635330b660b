#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "malforge/acgan.hpp"
#include "malforge/experiments.hpp"
#include "malforge/metrics.hpp"

namespace malforge {

/// Generator (blue) and discriminator (red) loss per iteration, with a light
/// raw series under a moving average.
void render_loss_plot(const TrainingTrace& trace, const std::filesystem::path& path);

/// Row-normalized heatmap, one square cell per class pair; darker is larger.
/// Class names label the rows (true) and columns (predicted).
void render_confusion(const ConfusionMatrix& cm, const std::filesystem::path& path);

struct BarGroup {
  std::string name;
  std::vector<double> values;  // each in [0, 1]
};

/// Grouped bar chart on a [0, 1] axis; series colors cycle blue, orange,
/// green, red, purple and are named in the legend.
void render_bar_chart(const std::vector<BarGroup>& groups, const std::filesystem::path& path,
                      const std::vector<std::string>& series_names = {});

}  // namespace malforge
