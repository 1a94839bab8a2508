#ifndef MIRFS_MIRFS_HPP
#define MIRFS_MIRFS_HPP

#include "builtin_models.hpp"
#include "check_suite.hpp"
#include "error.hpp"
#include "estimation.hpp"
#include "io.hpp"
#include "likelihood.hpp"
#include "mirfs_core.hpp"
#include "model.hpp"
#include "multiindex.hpp"
#include "oracles.hpp"
#include "random.hpp"
#include "simulation.hpp"

#endif  // MIRFS_MIRFS_HPP
