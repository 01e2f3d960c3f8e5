#pragma once

#include "netinfer/config.hpp"
#include "netinfer/errors.hpp"
#include "netinfer/family.hpp"
#include "netinfer/glm.hpp"
#include "netinfer/gof.hpp"
#include "netinfer/inference.hpp"
#include "netinfer/io.hpp"
#include "netinfer/minorizer.hpp"
#include "netinfer/model.hpp"
#include "netinfer/network.hpp"
#include "netinfer/optimizer.hpp"
#include "netinfer/oracle.hpp"
#include "netinfer/population.hpp"
#include "netinfer/pseudolik.hpp"
#include "netinfer/rng.hpp"
#include "netinfer/sampler.hpp"
#include "netinfer/study.hpp"
