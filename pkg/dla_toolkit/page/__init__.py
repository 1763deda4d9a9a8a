# Page model package initialization
