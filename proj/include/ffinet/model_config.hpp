#pragma once

#include <cstdint>
#include <vector>

#include "ffinet/scene.hpp"

namespace ffinet {

enum class FrameMode { anchor, absolute };

struct ModelConfig {
    int hidden = 128;
    int K = 6;
    int obs_len = 20;
    int pred_len = 30;
    int lane_gcn_layers = 2;
    std::vector<int> dilations{1, 2, 4};
    bool current_fusion = true;
    bool future_feedback = true;
    bool global_fusion = true;
    bool feedback_back = true;
    bool feedback_future = true;
    bool feedback_forward = true;
    FrameMode current_frame = FrameMode::anchor;
    GraphThresholds thresholds{};
    std::uint64_t init_seed = 0;
};

}  // namespace ffinet
