#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pta/calibration.hpp"
#include "pta/remapping.hpp"

namespace pta {

enum class Activation { None, Relu };

struct DenseLayer {
    Matrix weight;             // fan_out x fan_in
    std::vector<double> bias;  // fan_out
    Activation activation = Activation::None;
};

struct Dataset {
    Matrix inputs;            // n x dim
    std::vector<int> labels;  // n, class ids
};

// Loss geometry recorded with the trained weights: signed mean training-loss
// gradient, and the mean squared per-sample gradient as a diagonal curvature
// proxy. Both in weight shape; chunk-resolution views are cut at run time.
struct LayerGeometry {
    Matrix grad;
    Matrix sqgrad;
};

struct ModelFixture {
    std::vector<DenseLayer> layers;
    std::vector<LayerGeometry> geometry;        // parallel to layers
    std::vector<std::vector<double>> salience;  // per layer: per-chunk mean |grad|, sums to 1
    std::size_t tiles = 4;                      // chunk grid the salience was cut for
    std::size_t cores_per_tile = 4;
    std::size_t core_size = 8;
    Dataset evaluation;                         // held-out set for accuracy scoring
    double clean_accuracy = 0.0;                // software accuracy at train time
    std::uint64_t train_seed = 0;

    void validate() const;  // shape chain, geometry shapes, salience chunk counts
};

// Two interleaved spirals lifted into `dim` dimensions by a seeded linear map.
// The lift depends only on the seed; `part` selects a disjoint jitter stream,
// so train/eval splits drawn with the same seed share one embedding.
Dataset make_spirals(std::size_t count, std::size_t dim, std::uint64_t seed,
                     double jitter = 0.05, std::uint64_t part = 0);

std::vector<double> forward_software(const std::vector<DenseLayer>& layers,
                                     const std::vector<double>& input);
double accuracy_software(const std::vector<DenseLayer>& layers, const Dataset& data);

struct TrainOptions {
    int epochs = 200;
    std::size_t batch = 32;
    double learning_rate = 0.01;       // Adam step size
    std::size_t train_samples = 2048;
    std::size_t eval_samples = 256;
    double accuracy_floor = 0.95;      // below this the trainer refuses the fixture
    std::size_t input_dim = 16;
    std::size_t hidden = 32;
    std::size_t classes = 2;
};

// Train the two-layer MLP on seeded spirals, then record the loss geometry,
// per-chunk salience and the held-out evaluation set. Throws DidNotConverge
// when the held-out accuracy misses the floor.
ModelFixture train_fixture(const TrainOptions& opts, std::uint64_t seed, std::size_t tiles = 4,
                           std::size_t cores_per_tile = 4, std::size_t core_size = 8);

void save_fixture(const ModelFixture& fixture, const std::string& path);
ModelFixture load_fixture(const std::string& path);  // SchemaError / ShapeMismatch

// Stored per-chunk salience of one layer; throws ShapeMismatch unless the
// mapping's chunk grid matches what the fixture was cut for.
SalienceTable layer_salience(const ModelFixture& fixture, std::size_t layer,
                             const WeightMapping& mapping);
// Logical Rk x Ck gradient/curvature blocks for one layer's mapping.
GradientTable layer_gradients(const ModelFixture& fixture, std::size_t layer,
                              const WeightMapping& mapping);

} // namespace pta
