# Command Line App
