#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bagrisk {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based stream derivation: the seed of a stream depends only on the
/// root seed and its path (e.g. {rep, cell, bag}), never on draw order.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

Engine make_engine(std::uint64_t root, std::initializer_list<std::uint64_t> path = {});

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Engine& engine);
Eigen::VectorXd standard_normal(Eigen::Index size, Engine& engine);

}  // namespace bagrisk
