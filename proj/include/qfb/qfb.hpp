#pragma once

#include "qfb/core.hpp"
#include "qfb/fock.hpp"
#include "qfb/density.hpp"
#include "qfb/quadrature.hpp"
#include "qfb/superop.hpp"
#include "qfb/models.hpp"
#include "qfb/steady.hpp"
#include "qfb/analysis.hpp"
#include "qfb/trajectory.hpp"
#include "qfb/config.hpp"
#include "qfb/experiments.hpp"
