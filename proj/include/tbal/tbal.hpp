#pragma once

#include "tbal/error.hpp"
#include "tbal/poset.hpp"
#include "tbal/loglinear.hpp"
#include "tbal/newton.hpp"
#include "tbal/projection.hpp"
#include "tbal/dense_array.hpp"
#include "tbal/generators.hpp"
#include "tbal/balancing.hpp"
#include "tbal/io.hpp"
