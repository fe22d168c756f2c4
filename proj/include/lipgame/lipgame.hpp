#pragma once

#include "analysis.hpp"
#include "anonymous.hpp"
#include "counterexamples.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "game.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "polymatrix.hpp"
#include "profile.hpp"
#include "purification.hpp"
#include "replication.hpp"
#include "rng.hpp"
