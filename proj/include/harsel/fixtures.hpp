#pragma once

#include <string_view>

// Bundled LLM responses replayed in fixture mode. Kept byte-identical to
// data/fixtures/*.json (checked by test_knowledge).

namespace harsel::fixtures {

inline constexpr std::string_view kSemanticFeatures = R"json({
  "features": [
    {
      "name": "verticality",
      "weights": {
        "acc_z_mean": 0.8,
        "acc_z_std": 0.6
      }
    },
    {
      "name": "lateral_movement",
      "weights": {
        "acc_x_mean": 1.2,
        "acc_y_mean": -0.5
      }
    },
    {
      "name": "rotation",
      "weights": {
        "gyr_z_mean": 1.5,
        "gyr_z_std": 0.5
      }
    },
    {
      "name": "acceleration_magnitude",
      "weights": {
        "acc_x_mean": 0.5,
        "acc_y_mean": 0.5,
        "acc_z_mean": 0.5
      }
    },
    {
      "name": "gyr_std_dev",
      "weights": {
        "gyr_x_std": 1.0,
        "gyr_y_std": 1.0,
        "gyr_z_std": 1.0
      }
    },
    {
      "name": "activity_level",
      "weights": {
        "acc_x_std": 1.0,
        "acc_y_std": 1.0,
        "acc_z_std": 1.0
      }
    }
  ]
}
)json";

inline constexpr std::string_view kKnowledgePrior = R"json({
  "label_feature_weights": {
    "WALKING": {"acc_x_mean": 0.5, "acc_y_mean": -0.5, "acc_z_mean": -0.5, "gyr_x_std": 0.5, "gyr_y_std": 0.5
    },
    "WALKING_UPSTAIRS": {"acc_x_mean": 0.4, "acc_y_mean": -0.8, "acc_z_mean": -0.7, "gyr_x_mean": 0.3, "gyr_y_std": 0.5
    },
    "WALKING_DOWNSTAIRS": {"acc_x_mean": 0.5, "acc_y_mean": -0.5, "acc_z_mean": -0.4, "gyr_x_std": -0.3, "gyr_y_std": 0.5
    },
    "SITTING": {"acc_x_mean": 0.4, "acc_y_mean": 0.3, "acc_z_mean": 0.2, "gyr_x_std": -0.5, "gyr_y_std": -0.5
    },
    "STANDING": {"acc_x_mean": 0.5, "acc_y_mean": -0.5, "acc_z_mean": -0.3, "gyr_x_std": 0.2, "gyr_y_std": -0.5
    },
    "LAYING": {"acc_x_mean": -0.5, "acc_y_mean": 0.5, "acc_z_mean": 0.4, "gyr_x_std": -0.5, "gyr_y_std": -0.5
    }
  },
  "confusability": {
    "WALKING": {"WALKING_UPSTAIRS": 0.5, "WALKING_DOWNSTAIRS": 0.5, "SITTING": 0.3, "STANDING": 0.4
    },
    "WALKING_UPSTAIRS": {"WALKING": 0.5, "WALKING_DOWNSTAIRS": 0.6, "SITTING": 0.4, "STANDING": 0.5
    },
    "WALKING_DOWNSTAIRS": {"WALKING": 0.5, "WALKING_UPSTAIRS": 0.6, "SITTING": 0.4, "STANDING": 0.5
    },
    "SITTING": { "WALKING": 0.3, "WALKING_UPSTAIRS": 0.4, "WALKING_DOWNSTAIRS": 0.4, "STANDING": 0.5
    },
    "STANDING": {"WALKING": 0.4, "WALKING_UPSTAIRS": 0.5, "WALKING_DOWNSTAIRS": 0.5, "SITTING": 0.5
    },
    "LAYING": { "SITTING": 0.3, "STANDING": 0.4
    }
  },
  "label_budget_multiplier": {
    "WALKING": 1.2,
    "WALKING_UPSTAIRS": 1.1,
    "WALKING_DOWNSTAIRS": 1.1,
    "SITTING": 1.0,
    "STANDING": 1.0,
    "LAYING": 0.9
  }
}
)json";

}  // namespace harsel::fixtures
