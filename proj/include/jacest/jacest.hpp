#pragma once

#include "jacest/errors.hpp"
#include "jacest/network.hpp"
#include "jacest/neighbors.hpp"
#include "jacest/estimator.hpp"
#include "jacest/evaluation.hpp"
#include "jacest/testbed.hpp"
#include "jacest/theory.hpp"
#include "jacest/io.hpp"
